//! Bags, their class proportions, and the linear mass constraints they induce.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{LlpError, Result};

const PROPORTION_TOL: f64 = 1e-9;

/// A partition of instances into `K` bags with per-bag class proportions.
///
/// `mass[(k, h)]` is the amount of class `h` in bag `k`. When the structure
/// is derived from ground truth it holds integer counts; when proportions are
/// supplied directly it is `pi[k][h] * |B_k|` and may be fractional.
#[derive(Debug, Clone, PartialEq)]
pub struct BagStructure {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
    proportions: DMatrix<f64>,
    mass: DMatrix<f64>,
}

impl BagStructure {
    /// Builds a bag structure whose proportions are counted from the labels.
    pub fn from_labels(assignment: &[usize], true_labels: &[usize], n_classes: usize) -> Result<Self> {
        if assignment.len() != true_labels.len() {
            return Err(LlpError::LengthMismatch {
                expected: assignment.len(),
                actual: true_labels.len(),
            });
        }
        if n_classes < 2 {
            return Err(LlpError::InvalidInput("need at least 2 classes".into()));
        }
        let members = group_members(assignment)?;
        let k = members.len();
        let mut counts = DMatrix::zeros(k, n_classes);
        for (&bag, &label) in assignment.iter().zip(true_labels) {
            if label >= n_classes {
                return Err(LlpError::InvalidInput(format!(
                    "label {label} outside 0..{n_classes}"
                )));
            }
            counts[(bag, label)] += 1.0;
        }
        let proportions = DMatrix::from_fn(k, n_classes, |b, h| {
            counts[(b, h)] / members[b].len() as f64
        });
        Ok(BagStructure {
            assignment: assignment.to_vec(),
            members,
            proportions,
            mass: counts,
        })
    }

    /// Builds a bag structure from user-supplied proportions (rows sum to 1).
    pub fn from_proportions(assignment: &[usize], proportions: DMatrix<f64>) -> Result<Self> {
        let members = group_members(assignment)?;
        if proportions.nrows() != members.len() {
            return Err(LlpError::LengthMismatch {
                expected: members.len(),
                actual: proportions.nrows(),
            });
        }
        if proportions.ncols() < 2 {
            return Err(LlpError::InvalidInput("need at least 2 classes".into()));
        }
        for (k, row) in proportions.row_iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(LlpError::InvalidInput(format!(
                    "bag {k}: proportions must lie in [0, 1]"
                )));
            }
            if (row.sum() - 1.0).abs() > PROPORTION_TOL {
                return Err(LlpError::InvalidInput(format!(
                    "bag {k}: proportions sum to {}, not 1",
                    row.sum()
                )));
            }
        }
        let mass = DMatrix::from_fn(proportions.nrows(), proportions.ncols(), |k, h| {
            proportions[(k, h)] * members[k].len() as f64
        });
        Ok(BagStructure {
            assignment: assignment.to_vec(),
            members,
            proportions,
            mass,
        })
    }

    /// Binary convenience: `positive[k]` is the positive-class proportion of bag `k`.
    pub fn from_positive_proportions(assignment: &[usize], positive: &[f64]) -> Result<Self> {
        let p = DMatrix::from_fn(positive.len(), 2, |k, h| {
            if h == 1 {
                positive[k]
            } else {
                1.0 - positive[k]
            }
        });
        BagStructure::from_proportions(assignment, p)
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_bags(&self) -> usize {
        self.members.len()
    }

    pub fn n_classes(&self) -> usize {
        self.proportions.ncols()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self, bag: usize) -> &[usize] {
        &self.members[bag]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// `K x c` matrix of class proportions.
    pub fn proportions(&self) -> &DMatrix<f64> {
        &self.proportions
    }

    /// `K x c` matrix of class counts (class mass).
    pub fn counts(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn positive_proportion(&self, bag: usize) -> f64 {
        self.proportions[(bag, 1)]
    }

    /// The constraint system `A f = b` consumed by the solvers. Carries bag
    /// membership and class mass only.
    pub fn constraints(&self) -> BagConstraintSystem {
        BagConstraintSystem {
            members: self.members.clone(),
            target: self.mass.clone(),
        }
    }

    /// Writes the `instance_index,bag_id` bag file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_assignment_csv(&self.assignment, path)
    }
}

/// Bag structure with proportions counted from ground-truth labels.
pub fn make_bag_structure(
    assignment: &[usize],
    true_labels: &[usize],
    n_classes: usize,
) -> Result<BagStructure> {
    BagStructure::from_labels(assignment, true_labels, n_classes)
}

fn group_members(assignment: &[usize]) -> Result<Vec<Vec<usize>>> {
    if assignment.is_empty() {
        return Err(LlpError::InvalidInput("empty bag assignment".into()));
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &bag) in assignment.iter().enumerate() {
        members[bag].push(i);
    }
    if let Some(empty) = members.iter().position(Vec::is_empty) {
        return Err(LlpError::EmptyBag(empty));
    }
    Ok(members)
}

/// `A f = b`: bag membership lists (the rows of `A`) and per-class target mass.
#[derive(Debug, Clone, PartialEq)]
pub struct BagConstraintSystem {
    members: Vec<Vec<usize>>,
    target: DMatrix<f64>,
}

impl BagConstraintSystem {
    /// Binary system with positive-class targets `b`.
    pub fn binary(members: Vec<Vec<usize>>, b: Vec<f64>) -> Self {
        let k = b.len();
        assert_eq!(members.len(), k, "one target per bag");
        let target = DMatrix::from_fn(k, 2, |j, h| {
            if h == 1 {
                b[j]
            } else {
                members[j].len() as f64 - b[j]
            }
        });
        BagConstraintSystem { members, target }
    }

    pub fn n_bags(&self) -> usize {
        self.members.len()
    }

    pub fn n_classes(&self) -> usize {
        self.target.ncols()
    }

    pub fn members(&self, bag: usize) -> &[usize] {
        &self.members[bag]
    }

    pub fn bags(&self) -> impl Iterator<Item = &[usize]> {
        self.members.iter().map(Vec::as_slice)
    }

    /// `b_j = n_{j,1}`, the positive-class mass of each bag.
    pub fn positive_mass(&self) -> Vec<f64> {
        self.target.column(1).iter().copied().collect()
    }

    /// `K x c` per-class mass targets.
    pub fn class_mass(&self) -> &DMatrix<f64> {
        &self.target
    }

    /// Evaluates `A f` for a vector of per-instance values.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.iter().map(|&i| f[i]).sum())
            .collect()
    }
}

/// Reads an `instance_index,bag_id` file into an assignment vector of length `n`.
pub fn load_bag_csv(path: &Path, n: usize) -> Result<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            LlpError::InvalidInput(format!("{}: missing column {name:?}", path.display()))
        })
    };
    let (ii, bi) = (col("instance_index")?, col("bag_id")?);
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    for (r, record) in reader.records().enumerate() {
        let row = r + 2;
        let malformed = |message: String| LlpError::MalformedRow {
            path: path.to_path_buf(),
            row,
            message,
        };
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let parse = |idx: usize| -> Result<usize> {
            let field = record.get(idx).unwrap_or("");
            field
                .parse()
                .map_err(|_| malformed(format!("{field:?} is not a non-negative integer")))
        };
        let (i, bag) = (parse(ii)?, parse(bi)?);
        if i >= n {
            return Err(malformed(format!("instance index {i} out of range 0..{n}")));
        }
        if assignment[i].replace(bag).is_some() {
            return Err(malformed(format!("instance {i} assigned twice")));
        }
    }
    assignment
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            b.ok_or_else(|| LlpError::InvalidInput(format!("instance {i} has no bag")))
        })
        .collect()
}

pub fn write_assignment_csv(assignment: &[usize], path: &Path) -> Result<()> {
    let mut out = String::from("instance_index,bag_id\n");
    for (i, b) in assignment.iter().enumerate() {
        out.push_str(&format!("{i},{b}\n"));
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| LlpError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_and_proportions_from_labels() {
        let bags = BagStructure::from_labels(&[0, 0, 1, 1], &[1, 0, 1, 1], 2).unwrap();
        assert_eq!(bags.counts(), &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]));
        assert_eq!(
            bags.proportions(),
            &DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 1.0])
        );
        assert_eq!(bags.sizes(), vec![2, 2]);
    }

    #[test]
    fn single_degenerate_bag() {
        let bags = BagStructure::from_labels(&[0, 0, 0], &[0, 0, 0], 2).unwrap();
        assert_eq!(bags.proportions(), &DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn empty_bag_is_error() {
        let err = BagStructure::from_labels(&[0, 0, 2, 2], &[0, 1, 0, 1], 2).unwrap_err();
        assert!(matches!(err, LlpError::EmptyBag(1)));
    }

    #[test]
    fn fractional_mass_left_fractional() {
        let bags = BagStructure::from_positive_proportions(&[0, 0, 0], &[0.5]).unwrap();
        assert_eq!(bags.constraints().positive_mass(), vec![1.5]);
    }

    #[test]
    fn bad_proportion_rows_rejected() {
        let p = DMatrix::from_row_slice(1, 2, &[0.5, 0.6]);
        assert!(BagStructure::from_proportions(&[0, 0], p).is_err());
    }

    #[test]
    fn bag_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bags.csv");
        write_assignment_csv(&[2, 0, 1, 0], &path).unwrap();
        assert_eq!(load_bag_csv(&path, 4).unwrap(), vec![2, 0, 1, 0]);
        assert!(load_bag_csv(&path, 5).is_err());
    }

    proptest! {
        #[test]
        fn partition_and_roundtrip(labels in prop::collection::vec((0usize..4, 0usize..3), 1..60)) {
            // compact bag ids so none is empty
            let mut ids: Vec<usize> = labels.iter().map(|p| p.0).collect();
            let mut seen: Vec<usize> = ids.clone();
            seen.sort_unstable();
            seen.dedup();
            for id in ids.iter_mut() {
                *id = seen.binary_search(id).unwrap();
            }
            let y: Vec<usize> = labels.iter().map(|p| p.1).collect();
            let bags = BagStructure::from_labels(&ids, &y, 3).unwrap();
            prop_assert_eq!(bags.sizes().iter().sum::<usize>(), ids.len());
            let mut all: Vec<usize> = (0..bags.n_bags()).flat_map(|k| bags.members(k).to_vec()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..ids.len()).collect::<Vec<_>>());
            for k in 0..bags.n_bags() {
                let size = bags.members(k).len() as f64;
                let row = bags.counts().row(k);
                prop_assert!((row.sum() - size).abs() < 1e-12);
                prop_assert!((bags.proportions().row(k).sum() - 1.0).abs() <= 1e-9);
                for h in 0..3 {
                    prop_assert!((row[h] / size - bags.proportions()[(k, h)]).abs() <= 1e-9);
                }
            }
        }
    }
}

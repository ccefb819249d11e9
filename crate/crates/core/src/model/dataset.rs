// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

/// Class index used for the binary hypothesis `+1`.
pub const PLUS: usize = 0;
/// Class index used for the binary hypothesis `-1`.
pub const MINUS: usize = 1;

/// `+1.0` for class 0, `-1.0` for class 1.
pub fn sign_of_class(class: usize) -> Result<f64> {
    match class {
        PLUS => Ok(1.0),
        MINUS => Ok(-1.0),
        other => Err(Error::OutOfRange(format!(
            "class {other} is not a binary label"
        ))),
    }
}

/// Binary class index for a decision sign.
pub fn class_of_sign(sign: i8) -> usize {
    if sign >= 0 {
        PLUS
    } else {
        MINUS
    }
}

/// One agent's labeled view of the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: labels.len(),
                context: "labels vs features",
            });
        }
        if num_classes == 0 {
            return Err(Error::invalid("need at least one class"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::OutOfRange(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        if let Some(d) = features.first().map(Vec::len) {
            if let Some(f) = features.iter().find(|f| f.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: f.len(),
                    context: "feature dimension",
                });
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.features.first().map(Vec::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &usize)> {
        self.features.iter().map(Vec::as_slice).zip(&self.labels)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        self.labels.iter().for_each(|&y| c[y] += 1);
        c
    }

    pub fn is_balanced(&self) -> bool {
        let c = self.class_counts();
        c.windows(2).all(|w| w[0] == w[1])
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Indices of samples whose label is in `classes`.
    pub fn indices_with_labels(&self, classes: &[usize]) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balance_and_counts() {
        let d = LabeledDataset::new(vec![vec![0.0]; 4], vec![0, 1, 1, 0], 2).unwrap();
        assert_eq!(d.class_counts(), vec![2, 2]);
        assert!(d.is_balanced());
        let u = LabeledDataset::new(vec![vec![0.0]; 3], vec![0, 1, 1], 2).unwrap();
        assert!(!u.is_balanced());
    }

    #[test]
    fn validation() {
        assert!(LabeledDataset::new(vec![vec![0.0]], vec![], 2).is_err());
        assert!(LabeledDataset::new(vec![vec![0.0]], vec![2], 2).is_err());
        assert!(LabeledDataset::new(vec![vec![0.0], vec![0.0, 1.0]], vec![0, 1], 2).is_err());
        assert!(sign_of_class(2).is_err());
        assert_eq!(sign_of_class(PLUS).unwrap(), 1.0);
        assert_eq!(class_of_sign(0), PLUS);
        assert_eq!(class_of_sign(-1), MINUS);
    }
}

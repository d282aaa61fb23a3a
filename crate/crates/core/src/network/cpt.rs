use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surprise::{Distribution, MASS_TOLERANCE};

/// Dense conditional probability table.
///
/// Columns are stored in row-major order of the declared parent list: the
/// last parent varies fastest. That ordering is part of the serialized
/// format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    child: String,
    child_cardinality: usize,
    parents: Vec<String>,
    parent_cardinalities: Vec<usize>,
    table: Vec<Vec<f64>>,
}

impl ConditionalTable {
    pub fn new(
        child: impl Into<String>,
        child_cardinality: usize,
        parents: Vec<(String, usize)>,
        table: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let (parents, parent_cardinalities) = parents.into_iter().unzip();
        let cpt = ConditionalTable {
            child: child.into(),
            child_cardinality,
            parents,
            parent_cardinalities,
            table,
        };
        cpt.validate()?;
        Ok(cpt)
    }

    /// Builds a table by evaluating `column` at every parent configuration.
    pub fn from_fn<F>(
        child: impl Into<String>,
        child_cardinality: usize,
        parents: Vec<(String, usize)>,
        mut column: F,
    ) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let cards: Vec<usize> = parents.iter().map(|p| p.1).collect();
        let table = configurations(&cards).map(|cfg| column(&cfg)).collect();
        Self::new(child, child_cardinality, parents, table)
    }

    /// Checks density, arity and per-column normalization.
    pub fn validate(&self) -> Result<()> {
        if self.child_cardinality < 2 {
            return Err(Error::CardinalityOne);
        }
        if self.parents.len() != self.parent_cardinalities.len() {
            return Err(Error::ArityMismatch(format!(
                "{}: {} parents but {} cardinalities",
                self.child,
                self.parents.len(),
                self.parent_cardinalities.len()
            )));
        }
        if self.parent_cardinalities.contains(&0) {
            return Err(Error::ArityMismatch(format!("{}: empty parent domain", self.child)));
        }
        if self.table.len() != self.config_count() {
            return Err(Error::ArityMismatch(format!(
                "{}: {} columns for {} parent configurations",
                self.child,
                self.table.len(),
                self.config_count()
            )));
        }
        for (i, col) in self.table.iter().enumerate() {
            if col.len() != self.child_cardinality {
                return Err(Error::ArityMismatch(format!(
                    "{}: column {i} has {} entries, expected {}",
                    self.child,
                    col.len(),
                    self.child_cardinality
                )));
            }
            let total: f64 = col.iter().sum();
            if col.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::InvalidDistribution(format!(
                    "{}: column {i} = {col:?}",
                    self.child
                )));
            }
        }
        Ok(())
    }

    pub fn child(&self) -> &str {
        &self.child
    }

    pub fn child_cardinality(&self) -> usize {
        self.child_cardinality
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn parent_cardinalities(&self) -> &[usize] {
        &self.parent_cardinalities
    }

    pub fn config_count(&self) -> usize {
        self.parent_cardinalities.iter().product()
    }

    pub fn config_index(&self, config: &[usize]) -> Result<usize> {
        if config.len() != self.parents.len() {
            return Err(Error::ArityMismatch(format!(
                "{}: {} parent values for {} parents",
                self.child,
                config.len(),
                self.parents.len()
            )));
        }
        let mut index = 0;
        for (&v, &card) in config.iter().zip(&self.parent_cardinalities) {
            if v >= card {
                return Err(Error::IndexOutOfRange { index: v, len: card });
            }
            index = index * card + v;
        }
        Ok(index)
    }

    pub fn config_at(&self, index: usize) -> Vec<usize> {
        let mut rest = index;
        let mut cfg = vec![0; self.parents.len()];
        for (slot, &card) in cfg.iter_mut().zip(&self.parent_cardinalities).rev() {
            *slot = rest % card;
            rest /= card;
        }
        cfg
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.table[index]
    }

    pub fn column_for(&self, config: &[usize]) -> Result<&[f64]> {
        Ok(&self.table[self.config_index(config)?])
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn distribution(&self, index: usize) -> Result<Distribution> {
        Distribution::from_probs(self.table[index].clone())
    }

    pub fn set_column(&mut self, index: usize, column: Vec<f64>) -> Result<()> {
        if column.len() != self.child_cardinality {
            return Err(Error::ArityMismatch(format!(
                "{}: column of length {}",
                self.child,
                column.len()
            )));
        }
        self.table[index] = column;
        Ok(())
    }

    /// Appends a parent; every existing column is replicated across the
    /// new parent's values.
    pub fn with_added_parent(&self, name: impl Into<String>, cardinality: usize) -> ConditionalTable {
        let mut out = self.clone();
        out.parents.push(name.into());
        out.parent_cardinalities.push(cardinality);
        out.table = self
            .table
            .iter()
            .flat_map(|col| std::iter::repeat_n(col.clone(), cardinality))
            .collect();
        out
    }

    pub fn parent_position(&self, name: &str) -> Option<usize> {
        self.parents.iter().position(|p| p == name)
    }

    /// Largest absolute entry-wise difference to a table of the same shape.
    pub fn max_abs_diff(&self, other: &ConditionalTable) -> Result<f64> {
        if self.parents != other.parents
            || self.parent_cardinalities != other.parent_cardinalities
            || self.child_cardinality != other.child_cardinality
        {
            return Err(Error::ArityMismatch(format!(
                "cannot compare tables of {} and {}",
                self.child, other.child
            )));
        }
        Ok(self
            .table
            .iter()
            .zip(&other.table)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }
}

/// Iterates all configurations of the given domains in row-major order.
pub fn configurations(cards: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = cards.iter().product();
    (0..total).map(move |mut index| {
        let mut cfg = vec![0; cards.len()];
        for (slot, &card) in cfg.iter_mut().zip(cards).rev() {
            *slot = index % card;
            index /= card;
        }
        cfg
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ConditionalTable {
        ConditionalTable::from_fn("Y", 2, vec![("A".into(), 2), ("B".into(), 3)], |cfg| {
            let p = (cfg[0] * 3 + cfg[1]) as f64 / 10.0;
            vec![p, 1.0 - p]
        })
        .unwrap()
    }

    #[test]
    fn row_major_indexing() {
        let t = table();
        assert_eq!(t.config_count(), 6);
        assert_eq!(t.config_index(&[1, 2]).unwrap(), 5);
        assert_eq!(t.config_at(4), vec![1, 1]);
        assert!((t.column_for(&[1, 1]).unwrap()[0] - 0.4).abs() < 1e-15);
        assert!(t.config_index(&[2, 0]).is_err());
        assert!(t.config_index(&[0]).is_err());
    }

    #[test]
    fn added_parent_replicates() {
        let t = table();
        let t2 = t.with_added_parent("H", 2);
        assert_eq!(t2.config_count(), 12);
        for i in 0..6 {
            let cfg = t.config_at(i);
            for h in 0..2 {
                let mut c2 = cfg.clone();
                c2.push(h);
                assert_eq!(t2.column_for(&c2).unwrap(), t.column(i));
            }
        }
        t2.validate().unwrap();
    }

    #[test]
    fn validation_errors() {
        assert!(ConditionalTable::new("Y", 2, vec![], vec![vec![0.5, 0.4]]).is_err());
        assert!(ConditionalTable::new("Y", 2, vec![("A".into(), 2)], vec![vec![0.5, 0.5]]).is_err());
        assert!(ConditionalTable::new("Y", 1, vec![], vec![vec![1.0]]).is_err());
    }
}

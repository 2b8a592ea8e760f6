use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const UNASSIGNED: i64 = -1;

/// Per-point cluster labels; [`UNASSIGNED`] marks points in no cluster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    labels: Vec<i64>,
}

impl Segmentation {
    pub fn new(labels: Vec<i64>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l < UNASSIGNED) {
            return Err(Error::input(format!("label {bad} is below -1")));
        }
        Ok(Self { labels })
    }

    pub fn unassigned(n: usize) -> Self {
        Self {
            labels: vec![UNASSIGNED; n],
        }
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn set(&mut self, i: usize, label: i64) {
        self.labels[i] = label;
    }

    /// Number of distinct assigned labels.
    pub fn cluster_count(&self) -> usize {
        self.clusters().len()
    }

    pub fn unassigned_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == UNASSIGNED).count()
    }

    /// Member indices of every assigned label, keyed by label.
    pub fn clusters(&self) -> BTreeMap<i64, Vec<usize>> {
        let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if l != UNASSIGNED {
                map.entry(l).or_default().push(i);
            }
        }
        map
    }

    /// Relabels assigned ids to `0..M` preserving their order.
    pub fn compacted(&self) -> Segmentation {
        let ids: BTreeMap<i64, i64> = self
            .clusters()
            .keys()
            .enumerate()
            .map(|(new, &old)| (old, new as i64))
            .collect();
        Segmentation {
            labels: self
                .labels
                .iter()
                .map(|l| ids.get(l).copied().unwrap_or(UNASSIGNED))
                .collect(),
        }
    }

    /// Newline-separated integers, one per point.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.labels.len() * 3);
        for l in &self.labels {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let labels = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.parse::<i64>()
                    .map_err(|_| Error::format("label file", format!("line {}: `{l}`", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

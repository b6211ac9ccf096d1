//! Sparse addressing of vertices in the infinite d-ary tree.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Path of child indices from the root; each index is in `1..=d`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexAddress {
    pub path: Vec<u32>,
}

impl VertexAddress {
    pub fn root() -> VertexAddress {
        VertexAddress { path: Vec::new() }
    }

    pub fn is_root(&self) -> bool {
        self.path.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    pub fn parent(&self) -> Option<VertexAddress> {
        if self.is_root() {
            None
        } else {
            Some(VertexAddress { path: self.path[..self.path.len() - 1].to_vec() })
        }
    }

    pub fn child(&self, i: u32) -> VertexAddress {
        debug_assert!(i >= 1);
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(i);
        VertexAddress { path }
    }

    /// Index of this vertex among its parent's children.
    pub fn last(&self) -> Option<u32> {
        self.path.last().copied()
    }
}

impl fmt::Display for VertexAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            return write!(f, "()");
        }
        let parts: Vec<String> = self.path.iter().map(|i| i.to_string()).collect();
        write!(f, "({})", parts.join("."))
    }
}

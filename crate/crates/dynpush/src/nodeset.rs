//! Compact node sets over `[0, n)` backed by a bit vector.

/// Set of node ids in `[0, capacity)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NodeSet {
    bits: Vec<u64>,
    len: usize,
    capacity: usize,
}

impl NodeSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            bits: vec![0; capacity.div_ceil(64)],
            len: 0,
            capacity,
        }
    }

    pub fn singleton(capacity: usize, node: u32) -> Self {
        let mut s = Self::new(capacity);
        s.insert(node);
        s
    }

    pub fn from_iter(capacity: usize, nodes: impl IntoIterator<Item = u32>) -> Self {
        let mut s = Self::new(capacity);
        for u in nodes {
            s.insert(u);
        }
        s
    }

    /// Full set `[0, capacity)`.
    pub fn full(capacity: usize) -> Self {
        Self::from_iter(capacity, 0..capacity as u32)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.capacity
    }

    /// Insert `node`; returns true if it was not already present.
    pub fn insert(&mut self, node: u32) -> bool {
        let node = node as usize;
        assert!(node < self.capacity, "node {node} out of range");
        let (w, b) = (node / 64, node % 64);
        let mask = 1u64 << b;
        if self.bits[w] & mask == 0 {
            self.bits[w] |= mask;
            self.len += 1;
            true
        } else {
            false
        }
    }

    /// Remove `node`; returns true if it was present.
    pub fn remove(&mut self, node: u32) -> bool {
        let node = node as usize;
        assert!(node < self.capacity, "node {node} out of range");
        let (w, b) = (node / 64, node % 64);
        let mask = 1u64 << b;
        if self.bits[w] & mask != 0 {
            self.bits[w] &= !mask;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    pub fn contains(&self, node: u32) -> bool {
        let node = node as usize;
        node < self.capacity && self.bits[node / 64] & (1 << (node % 64)) != 0
    }

    /// True if every member of `self` is a member of `other`.
    pub fn is_subset_of(&self, other: &NodeSet) -> bool {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &NodeSet) {
        assert_eq!(self.capacity, other.capacity, "capacity mismatch");
        self.len = 0;
        for (a, b) in self.bits.iter_mut().zip(other.bits.iter()) {
            *a |= b;
            self.len += a.count_ones() as usize;
        }
    }

    /// Ascending iterator over members.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros();
                    bits &= bits - 1;
                    Some(w as u32 * 64 + b)
                }
            })
        })
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.iter().collect()
    }
}

impl std::fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_contains_iter() {
        let mut s = NodeSet::new(130);
        assert!(s.insert(0));
        assert!(s.insert(129));
        assert!(s.insert(64));
        assert!(!s.insert(64));
        assert_eq!(s.len(), 3);
        assert!(s.contains(129));
        assert!(!s.contains(1));
        assert_eq!(s.to_vec(), vec![0, 64, 129]);
    }

    #[test]
    fn subset_union_full() {
        let a = NodeSet::from_iter(10, [1, 3]);
        let b = NodeSet::from_iter(10, [1, 3, 7]);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        let mut c = a.clone();
        c.union_with(&b);
        assert_eq!(c.to_vec(), vec![1, 3, 7]);
        assert!(NodeSet::full(10).is_full());
        assert_eq!(NodeSet::full(0).len(), 0);
    }
}

use serde::{Deserialize, Serialize};

/// Binary adjacency matrix of a causal graph: `M[i][j] = 1` iff `i -> j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CausalMatrix {
    n: usize,
    cells: Vec<u8>,
}

impl CausalMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            cells: vec![0; n * n],
        }
    }

    /// Builds from rows of 0/1 entries. Returns `None` for ragged rows,
    /// non-binary entries or a non-zero diagonal.
    pub fn from_rows(rows: &[Vec<u8>]) -> Option<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return None;
            }
            for (j, &c) in row.iter().enumerate() {
                match (c, i == j) {
                    (0, _) => {}
                    (1, false) => m.set(i, j, true),
                    _ => return None,
                }
            }
        }
        Some(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.cells[i * self.n + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, on: bool) {
        debug_assert!(i != j, "diagonal stays zero");
        self.cells[i * self.n + j] = u8::from(on);
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.cells.chunks(self.n.max(1)).take(self.n).map(<[u8]>::to_vec).collect()
    }

    /// `(i, j)` of every 1-cell in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 1)
            .map(move |(k, _)| (k / n, k % n))
    }
}

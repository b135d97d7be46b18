use serde::{Deserialize, Serialize};

/// Position of every decision variable of one shrinking-horizon MIQP.
///
/// Blocks are stored one after another: buffer levels `x(1..=N)`, machine
/// amounts `u`, deliveries `d`, on/off states `δ`, startups `δ_on`, grid
/// energy `E_g`, renewable energy `E_r` (all indexed by step `0..N`), and
/// finally one end-of-horizon production slack per product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n_x: usize,
    pub n_u: usize,
    pub n_p: usize,
    pub horizon: usize,
    x: usize,
    u: usize,
    d: usize,
    delta: usize,
    delta_on: usize,
    e_g: usize,
    e_r: usize,
    s: usize,
    len: usize,
}

impl VariableLayout {
    pub fn new(n_x: usize, n_u: usize, n_p: usize, horizon: usize) -> Self {
        let x = 0;
        let u = x + horizon * n_x;
        let d = u + horizon * n_u;
        let delta = d + horizon * n_p;
        let delta_on = delta + horizon * n_u;
        let e_g = delta_on + horizon * n_u;
        let e_r = e_g + horizon;
        let s = e_r + horizon;
        let len = s + n_p;
        Self {
            n_x,
            n_u,
            n_p,
            horizon,
            x,
            u,
            d,
            delta,
            delta_on,
            e_g,
            e_r,
            s,
            len,
        }
    }

    /// Total number of decision variables.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Buffer `i` at the end of step `k` (that is, `x(k+1)`).
    pub fn x(&self, k: usize, i: usize) -> usize {
        debug_assert!(k < self.horizon && i < self.n_x);
        self.x + k * self.n_x + i
    }

    pub fn u(&self, k: usize, j: usize) -> usize {
        debug_assert!(k < self.horizon && j < self.n_u);
        self.u + k * self.n_u + j
    }

    pub fn d(&self, k: usize, p: usize) -> usize {
        debug_assert!(k < self.horizon && p < self.n_p);
        self.d + k * self.n_p + p
    }

    pub fn delta(&self, k: usize, j: usize) -> usize {
        debug_assert!(k < self.horizon && j < self.n_u);
        self.delta + k * self.n_u + j
    }

    pub fn delta_on(&self, k: usize, j: usize) -> usize {
        debug_assert!(k < self.horizon && j < self.n_u);
        self.delta_on + k * self.n_u + j
    }

    pub fn e_g(&self, k: usize) -> usize {
        debug_assert!(k < self.horizon);
        self.e_g + k
    }

    pub fn e_r(&self, k: usize) -> usize {
        debug_assert!(k < self.horizon);
        self.e_r + k
    }

    pub fn s(&self, p: usize) -> usize {
        debug_assert!(p < self.n_p);
        self.s + p
    }

    /// All on/off indices, step-major.
    pub fn binaries(&self) -> Vec<usize> {
        (self.delta..self.delta_on).collect()
    }

    /// Human-readable name of variable `idx`, e.g. `u[3][17]` for machine 3
    /// at step 17, or `x[1][0]` for buffer 1 after step 0.
    pub fn name(&self, idx: usize) -> String {
        let block = |start: usize, width: usize, label: &str| {
            let off = idx - start;
            format!("{label}[{}][{}]", off % width, off / width)
        };
        if idx < self.u {
            block(self.x, self.n_x, "x")
        } else if idx < self.d {
            block(self.u, self.n_u, "u")
        } else if idx < self.delta {
            block(self.d, self.n_p, "d")
        } else if idx < self.delta_on {
            block(self.delta, self.n_u, "delta")
        } else if idx < self.e_g {
            block(self.delta_on, self.n_u, "delta_on")
        } else if idx < self.e_r {
            format!("e_g[{}]", idx - self.e_g)
        } else if idx < self.s {
            format!("e_r[{}]", idx - self.e_r)
        } else {
            assert!(idx < self.len, "index {idx} outside layout");
            format!("s[{}]", idx - self.s)
        }
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.len).map(|i| self.name(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_are_disjoint_and_cover() {
        let l = VariableLayout::new(5, 6, 1, 4);
        let mut seen = vec![false; l.len()];
        let mut mark = |i: usize| {
            assert!(!seen[i], "index {i} assigned twice");
            seen[i] = true;
        };
        for k in 0..4 {
            (0..5).for_each(|i| mark(l.x(k, i)));
            for j in 0..6 {
                mark(l.u(k, j));
                mark(l.delta(k, j));
                mark(l.delta_on(k, j));
            }
            mark(l.d(k, 0));
            mark(l.e_g(k));
            mark(l.e_r(k));
        }
        mark(l.s(0));
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn names_follow_component_then_step() {
        let l = VariableLayout::new(5, 6, 1, 24);
        assert_eq!(l.name(l.u(17, 3)), "u[3][17]");
        assert_eq!(l.name(l.x(0, 1)), "x[1][0]");
        assert_eq!(l.name(l.e_r(5)), "e_r[5]");
        assert_eq!(l.name(l.s(0)), "s[0]");
    }
}

use std::cmp::Ordering;

/// Error-free running sum of `f64` values.
///
/// Holds the sum as a non-overlapping expansion (Shewchuk's partials), so
/// adding and later removing the same value leaves no residue. Used by the
/// moving average to produce correctly rounded window means.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    /// Non-overlapping components, increasing in magnitude.
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum::default()
    }

    pub fn add(&mut self, value: f64) {
        let mut x = value;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// Sum rounded to `f64` (within one ulp; not necessarily correctly rounded).
    pub fn approx(&self) -> f64 {
        self.partials.iter().rev().sum()
    }

    fn signum(&self) -> Ordering {
        self.partials
            .iter()
            .rev()
            .find(|&&p| p != 0.0)
            .map_or(Ordering::Equal, |p| p.partial_cmp(&0.0).unwrap())
    }

    /// Exact comparison of the sum against `z * count + offset * count`.
    fn cmp_scaled(&self, z: f64, offset: f64, count: f64) -> Ordering {
        let mut rest = self.clone();
        for term in [z, offset] {
            if term != 0.0 {
                let p = term * count;
                let e = term.mul_add(count, -p);
                rest.add(-p);
                rest.add(-e);
            }
        }
        rest.signum()
    }

    /// Correctly rounded (ties to even) value of `sum / count`.
    pub fn mean(&self, count: usize) -> f64 {
        assert!(count > 0, "mean of zero values");
        let w = count as f64;
        let mut z = self.approx() / w;
        // Bracket the exact mean: z * w <= sum < next_up(z) * w.
        while self.cmp_scaled(z, 0.0, w) == Ordering::Less {
            z = z.next_down();
        }
        while self.cmp_scaled(z.next_up(), 0.0, w) != Ordering::Less {
            z = z.next_up();
        }
        let up = z.next_up();
        match self.cmp_scaled(z, 0.0, w) {
            Ordering::Equal => return z,
            Ordering::Less => unreachable!("bracket invariant"),
            Ordering::Greater => {}
        }
        let half_gap = (up - z) * 0.5;
        match self.cmp_scaled(z, half_gap, w) {
            Ordering::Less => z,
            Ordering::Greater => up,
            Ordering::Equal => {
                if z.to_bits() & 1 == 0 {
                    z
                } else {
                    up
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_then_remove_is_exact() {
        let mut s = ExactSum::new();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.approx(), 1.0);
        s.add(-1.0);
        assert_eq!(s.approx(), 0.0);
        assert_eq!(s.signum(), Ordering::Equal);
    }

    #[test]
    fn mean_of_constant_is_constant() {
        for c in [0.1, 0.7, 1.0 / 3.0, 0.999_999_9] {
            for w in 1..=20 {
                let mut s = ExactSum::new();
                for _ in 0..w {
                    s.add(c);
                }
                assert_eq!(s.mean(w), c, "c={c} w={w}");
            }
        }
    }

    #[test]
    fn halfway_rounds_to_even() {
        // 0.2 + 0.4 halves to exactly the midpoint between 0.3 and its successor.
        let mut s = ExactSum::new();
        s.add(0.2);
        s.add(0.4);
        let m = s.mean(2);
        assert!(m == 0.3 || m == 0.3f64.next_up());
        assert_eq!(m.to_bits() & 1, 0);
    }
}

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{HarnessError, SamplingMode};
use crate::czono::{ConstrainedZonotope, IntervalBox};

const MAX_REJECTIONS: usize = 100_000;

/// A noise set prepared for sampling: its interval hull, and whether the
/// hull is the set itself (then no membership test is needed).
#[derive(Debug, Clone)]
pub struct SamplingTarget {
    set: ConstrainedZonotope,
    hull: IntervalBox,
    is_box: bool,
}

impl SamplingTarget {
    pub fn new(set: &ConstrainedZonotope) -> Result<Self, HarnessError> {
        let hull = set.interval_hull()?;
        if !hull.is_bounded() {
            return Err(HarnessError::Config("cannot sample from an unbounded noise set".into()));
        }
        let g = set.generators();
        let is_box = set.num_constraints() == 0
            && (0..g.ncols()).all(|j| g.column(j).iter().filter(|&&v| v != 0.0).count() <= 1);
        Ok(Self {
            set: set.clone(),
            hull,
            is_box,
        })
    }

    pub fn hull(&self) -> &IntervalBox {
        &self.hull
    }
}

/// Seeded bounded-noise generator.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    rng: ChaCha8Rng,
    mode: SamplingMode,
    scale: f64,
    grid: Option<f64>,
}

impl NoiseSampler {
    pub fn new(rng: ChaCha8Rng, mode: SamplingMode, scale: f64) -> Self {
        Self {
            rng,
            mode,
            scale,
            grid: None,
        }
    }

    /// Round every draw to a multiple of `grid`, staying inside the box it
    /// was drawn from.
    pub fn with_grid(mut self, grid: Option<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn snap(&self, x: DVector<f64>, bx: &IntervalBox) -> DVector<f64> {
        let Some(g) = self.grid else { return x };
        DVector::from_iterator(
            x.len(),
            x.iter().enumerate().map(|(j, &v)| {
                let (lo, hi) = (bx.lo()[j], bx.hi()[j]);
                let r = (v / g).round() * g;
                if r < lo {
                    (lo / g).ceil() * g
                } else if r > hi {
                    (hi / g).floor() * g
                } else {
                    r
                }
            }),
        )
    }

    /// Uniform point of a box, on the grid when one is set.
    pub fn uniform_in_box(&mut self, bx: &IntervalBox) -> DVector<f64> {
        let x = DVector::from_iterator(
            bx.dim(),
            (0..bx.dim()).map(|j| {
                let (lo, hi) = (bx.lo()[j], bx.hi()[j]);
                if lo < hi {
                    self.rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            }),
        );
        self.snap(x, bx)
    }

    fn rejection(&mut self, target: &SamplingTarget) -> Result<DVector<f64>, HarnessError> {
        for _ in 0..MAX_REJECTIONS {
            let x = self.uniform_in_box(&target.hull);
            if target.is_box || target.set.contains(&x)? {
                return Ok(x);
            }
        }
        Err(HarnessError::Config(format!(
            "rejection sampling found no point of a noise set in {MAX_REJECTIONS} tries"
        )))
    }

    fn vertex_of_box(&mut self, bx: &IntervalBox) -> DVector<f64> {
        DVector::from_iterator(
            bx.dim(),
            (0..bx.dim()).map(|j| if self.rng.gen_bool(0.5) { bx.lo()[j] } else { bx.hi()[j] }),
        )
    }

    /// One noise realization from `target`, then scaled about the hull
    /// center by the injection factor.
    ///
    /// Vertex mode picks a hull corner for boxes, a random sign pattern of
    /// the generators for unconstrained zonotopes, and falls back to uniform
    /// rejection sampling for sets with constraints (and for any non-box set
    /// when draws are gridded).
    pub fn sample(&mut self, target: &SamplingTarget) -> Result<DVector<f64>, HarnessError> {
        let x = match self.mode {
            SamplingMode::Vertex if target.is_box => self.vertex_of_box(&target.hull),
            SamplingMode::Vertex if target.set.num_constraints() == 0 && self.grid.is_none() => {
                let xi = DVector::from_iterator(
                    target.set.num_generators(),
                    target.set.half_widths().iter().map(|hw| {
                        let (_, hi) = hw.bounds();
                        if self.rng.gen_bool(0.5) { hi } else { -hi }
                    }),
                );
                target.set.point_at(&xi)
            }
            _ => self.rejection(target)?,
        };
        if self.scale == 1.0 {
            return Ok(x);
        }
        let c = target.hull.center();
        Ok(&c + (x - &c) * self.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;

    #[test]
    fn samples_stay_inside() {
        let bx = ConstrainedZonotope::from_box(&IntervalBox::from_slices(&[-1.0, 2.0], &[1.0, 2.5]).unwrap()).unwrap();
        let diamond = ConstrainedZonotope::zonotope(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]),
            DVector::zeros(2),
        )
        .unwrap();
        for mode in [SamplingMode::Uniform, SamplingMode::Vertex] {
            let mut s = NoiseSampler::new(ChaCha8Rng::seed_from_u64(1), mode, 1.0);
            for set in [&bx, &diamond] {
                let t = SamplingTarget::new(set).unwrap();
                for _ in 0..200 {
                    let x = s.sample(&t).unwrap();
                    assert!(set.contains(&x).unwrap());
                }
            }
        }
    }

    #[test]
    fn scaled_samples_leave_the_set() {
        let bx = ConstrainedZonotope::from_box(&IntervalBox::symmetric(1, 1.0).unwrap()).unwrap();
        let t = SamplingTarget::new(&bx).unwrap();
        let mut s = NoiseSampler::new(ChaCha8Rng::seed_from_u64(2), SamplingMode::Vertex, 3.0);
        assert_eq!(s.sample(&t).unwrap()[0].abs(), 3.0);
    }
}

//! Training tuples `(X(t), u(t), X(t+1))` with `X = [x; r]`, generated from
//! a simulated plant or loaded from captured process data.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::noise::{probing_noise, NoiseBasis, ProbingNoiseConfig};
use crate::error::{LqtError, Result};
use crate::linalg::{ensure_len, ensure_shape, Matrix, Vector};
use crate::state_space::{LinearSystem, ReferenceSignal};

/// Rollouts abort once `‖x‖` exceeds this.
pub const OVERFLOW_GUARD: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vector,
    pub input: Vector,
    pub next_state: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    plant_dim: usize,
    input_dim: usize,
    t0: i64,
    transitions: Vec<Transition>,
    seed: Option<u64>,
}

/// Parameter count of a symmetric kernel over `2n + m` joint coordinates.
pub fn identifiability_floor(plant_dim: usize, input_dim: usize) -> usize {
    let d = 2 * plant_dim + input_dim;
    d * (d + 1) / 2
}

impl TransitionDataset {
    pub fn new(plant_dim: usize, input_dim: usize, transitions: Vec<Transition>) -> Result<Self> {
        for tr in &transitions {
            ensure_len("transition state", &tr.state, 2 * plant_dim)?;
            ensure_len("transition next state", &tr.next_state, 2 * plant_dim)?;
            ensure_len("transition input", &tr.input, input_dim)?;
        }
        Ok(Self {
            plant_dim,
            input_dim,
            t0: 0,
            transitions,
            seed: None,
        })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn plant_dim(&self) -> usize {
        self.plant_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// True when every tuple starts where the previous one ended.
    pub fn is_chained(&self) -> bool {
        self.transitions.windows(2).all(|w| w[0].next_state == w[1].state)
    }

    /// Writes `t, x1..xn, r1..rn, u1..um` rows. Chained data is written as
    /// `N + 1` rows, the last with empty input cells; unchained tuples are
    /// written as row pairs.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.plant_dim;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("r{i}")));
        header.extend((1..=self.input_dim).map(|i| format!("u{i}")));
        w.write_record(&header)?;

        let row = |t: i64, big_x: &Vector, u: Option<&Vector>| {
            let mut rec = vec![t.to_string()];
            rec.extend(big_x.iter().map(|v| v.to_string()));
            match u {
                Some(u) => rec.extend(u.iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), self.input_dim)),
            }
            rec
        };

        if self.is_chained() {
            for (k, tr) in self.transitions.iter().enumerate() {
                w.write_record(row(self.t0 + k as i64, &tr.state, Some(&tr.input)))?;
            }
            if let Some(last) = self.transitions.last() {
                w.write_record(row(self.t0 + self.transitions.len() as i64, &last.next_state, None))?;
            }
        } else {
            for (k, tr) in self.transitions.iter().enumerate() {
                let t = self.t0 + 2 * k as i64;
                w.write_record(row(t, &tr.state, Some(&tr.input)))?;
                w.write_record(row(t + 1, &tr.next_state, None))?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads rows written by [`write_csv`](Self::write_csv) or captured
    /// externally. Consecutive rows form a tuple when the first row carries
    /// an input and the second row's `t` is one larger.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        let count = |prefix: char| {
            header
                .iter()
                .filter(|h| h.starts_with(prefix) && h[1..].parse::<usize>().is_ok())
                .count()
        };
        let (n, nr, m) = (count('x'), count('r'), count('u'));
        if n == 0 || m == 0 || n != nr || header.len() != 1 + 2 * n + m || &header[0] != "t" {
            return Err(LqtError::Format(format!(
                "expected columns t, x1..xn, r1..rn, u1..um; got {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut rows: Vec<(i64, Vector, Option<Vector>)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| LqtError::Format(format!("row {}: {e} in {s:?}", line + 1)))
            };
            let t = rec[0]
                .trim()
                .parse::<i64>()
                .map_err(|e| LqtError::Format(format!("row {}: bad time: {e}", line + 1)))?;
            let big_x = (1..=2 * n).map(|i| parse(&rec[i])).collect::<Result<Vec<_>>>()?;
            let u_cells: Vec<&str> = (1 + 2 * n..1 + 2 * n + m).map(|i| &rec[i]).collect();
            let u = if u_cells.iter().all(|c| c.trim().is_empty()) {
                None
            } else {
                Some(Vector::from_vec(u_cells.iter().map(|c| parse(c)).collect::<Result<Vec<_>>>()?))
            };
            rows.push((t, Vector::from_vec(big_x), u));
        }
        let t0 = rows.first().map(|r| r.0).unwrap_or(0);
        let transitions = rows
            .windows(2)
            .filter_map(|w| match (&w[0], &w[1]) {
                ((t, x, Some(u)), (t_next, x_next, _)) if *t_next == t + 1 => Some(Transition {
                    state: x.clone(),
                    input: u.clone(),
                    next_state: x_next.clone(),
                }),
                _ => None,
            })
            .collect();
        let mut data = Self::new(n, m, transitions)?;
        data.t0 = t0;
        Ok(data)
    }
}

/// Rolls the plant forward under `u(t) = -K x(t) + ω_pr(t)` (with
/// `u(t0) = ω1`) and records `count` consecutive tuples.
#[allow(clippy::too_many_arguments)]
pub fn generate_training_data(
    sys: &LinearSystem,
    reference: &ReferenceSignal,
    k: &Matrix,
    x0: &Vector,
    count: usize,
    seed: u64,
    noise: &ProbingNoiseConfig,
) -> Result<TransitionDataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let basis = NoiseBasis::draw(&mut rng, sys.input_dim(), noise)?;
    let mut data = generate_with_basis(sys, reference, k, x0, count, &basis, noise)?;
    data.seed = Some(seed);
    Ok(data)
}

/// [`generate_training_data`] with an explicit noise basis.
pub fn generate_with_basis(
    sys: &LinearSystem,
    reference: &ReferenceSignal,
    k: &Matrix,
    x0: &Vector,
    count: usize,
    basis: &NoiseBasis,
    noise: &ProbingNoiseConfig,
) -> Result<TransitionDataset> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    ensure_shape("generate_training_data: K", k, m, n)?;
    ensure_len("generate_training_data: x0", x0, n)?;
    if reference.dim() != n {
        return Err(LqtError::dim("generate_training_data: reference", n, reference.dim()));
    }
    if basis.dim() != m {
        return Err(LqtError::dim("generate_training_data: noise basis", m, basis.dim()));
    }
    let stack = |x: &Vector, r: &Vector| {
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(x);
        out.rows_mut(n, n).copy_from(r);
        out
    };

    let references = reference.sequence(count + 1);
    let mut transitions = Vec::with_capacity(count);
    let mut x = x0.clone();
    for t in 0..count {
        let u = if t == 0 {
            basis.offset.clone()
        } else {
            -(k * &x) + probing_noise(basis, t as i64, noise)
        };
        let next = sys.step(&x, &u)?;
        let norm = next.norm();
        if norm.is_nan() || norm > OVERFLOW_GUARD {
            return Err(LqtError::Unstable { t: t + 1, norm });
        }
        transitions.push(Transition {
            state: stack(&x, &references[t]),
            input: u,
            next_state: stack(&next, &references[t + 1]),
        });
        x = next;
    }
    TransitionDataset::new(n, m, transitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlearning::stabilizing_gain;
    use crate::state_space::{baam_model, baam_reference};

    fn baam_data(count: usize, seed: u64) -> TransitionDataset {
        generate_training_data(
            &baam_model(),
            &baam_reference(),
            &stabilizing_gain(),
            &Vector::from_element(6, 50.0),
            count,
            seed,
            &ProbingNoiseConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn floor_for_baam_dimensions() {
        assert_eq!(identifiability_floor(6, 7), 190);
        assert_eq!(identifiability_floor(1, 1), 6);
    }

    #[test]
    fn rollout_is_chained_and_seeded() {
        let a = baam_data(300, 4);
        assert_eq!(a.len(), 300);
        assert!(a.is_chained());
        assert_eq!(a, baam_data(300, 4));
        assert_ne!(a, baam_data(300, 5));
        assert_eq!(a.seed(), Some(4));
        // first input is the random offset alone
        let basis = crate::qlearning::draw_noise_basis(4, 7, &ProbingNoiseConfig::default()).unwrap();
        assert_eq!(a.transitions()[0].input, basis.offset);
        assert_eq!(a.transitions()[0].state.rows(0, 6).clone_owned(), Vector::from_element(6, 50.0));
        assert_eq!(a.transitions()[0].state.rows(6, 6).clone_owned(), *baam_reference().initial());
    }

    #[test]
    fn noiseless_closed_loop_settles() {
        let sys = baam_model();
        let data = generate_with_basis(
            &sys,
            &baam_reference(),
            &stabilizing_gain(),
            &Vector::from_element(6, 50.0),
            200,
            &NoiseBasis::zeros(7, 7),
            &ProbingNoiseConfig::default(),
        )
        .unwrap();
        let tail = &data.transitions()[150..];
        for tr in tail {
            assert!((&tr.state - &tail[0].state).amax() < 1e-9);
            assert!((&tr.input - &tail[0].input).amax() < 1e-9);
        }
    }

    #[test]
    fn unstable_feedback_hits_overflow_guard() {
        let k = -stabilizing_gain() * 3.0;
        let err = generate_training_data(
            &baam_model(),
            &baam_reference(),
            &k,
            &Vector::from_element(6, 50.0),
            2000,
            1,
            &ProbingNoiseConfig::default(),
        );
        assert!(matches!(err, Err(LqtError::Unstable { .. })));
    }

    #[test]
    fn csv_round_trip_preserves_tuples() {
        let data = baam_data(25, 8);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2,x3,x4,x5,x6,r1,r2,r3,r4,r5,r6,u1,u2,u3,u4,u5,u6,u7\n"));
        assert_eq!(text.lines().count(), 1 + 26);
        assert!(text.lines().last().unwrap().ends_with(",,,,,,,"));
        let back = TransitionDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.transitions(), data.transitions());
    }

    #[test]
    fn unchained_tuples_round_trip() {
        let tr = |a: f64| Transition {
            state: Vector::from_vec(vec![a, 1.0]),
            input: Vector::from_vec(vec![a * 2.0]),
            next_state: Vector::from_vec(vec![a + 0.5, 1.0]),
        };
        let data = TransitionDataset::new(1, 1, vec![tr(1.0), tr(3.0)]).unwrap();
        assert!(!data.is_chained());
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = TransitionDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.transitions(), data.transitions());
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(TransitionDataset::read_csv("t,x1,u1\n0,1,2\n".as_bytes()).is_err());
        assert!(TransitionDataset::read_csv("t,x1,r1,u1\n0,1,abc,2\n1,1,1,\n".as_bytes()).is_err());
    }
}

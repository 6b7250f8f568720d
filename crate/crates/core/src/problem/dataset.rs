use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::Scalar;

const HEADER: &str = "rdpsco-dataset v1";

/// The `m` samples contributed by one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord<T> {
    samples: Vec<Vec<T>>,
}

impl<T: Scalar> UserRecord<T> {
    pub fn new(samples: Vec<Vec<T>>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return invalid("a user must contribute at least one sample");
        };
        let d = first.len();
        if d == 0 {
            return invalid("samples must have at least one coordinate");
        }
        if samples.iter().any(|s| s.len() != d) {
            return invalid("all samples of a user must share one dimension");
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("sample payloads must be finite");
        }
        Ok(Self { samples })
    }

    /// A user whose `m` samples all equal `sample`.
    pub fn repeated(sample: Vec<T>, m: usize) -> Result<Self> {
        Self::new(vec![sample; m])
    }

    pub fn samples(&self) -> &[Vec<T>] {
        &self.samples
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }
}

/// Where a synthetic dataset came from; carried into the serialized header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub distribution: String,
}

/// `n` users with `m` samples each; the unit of user-level neighboring.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    users: Vec<UserRecord<T>>,
    m: usize,
    d: usize,
    provenance: Option<Provenance>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(users: Vec<UserRecord<T>>) -> Result<Self> {
        let Some(first) = users.first() else {
            return invalid("a dataset needs at least one user");
        };
        let (m, d) = (first.m(), first.dim());
        if let Some(idx) = users.iter().position(|u| u.m() != m || u.dim() != d) {
            return invalid(format!(
                "user {idx} does not match the dataset shape (m={m}, d={d})"
            ));
        }
        Ok(Self {
            users,
            m,
            d,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn users(&self) -> &[UserRecord<T>] {
        &self.users
    }

    pub fn n(&self) -> usize {
        self.users.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Copy of the dataset with user `index` replaced; the result is a
    /// user-level neighbor of `self`.
    pub fn with_user_replaced(&self, index: usize, user: UserRecord<T>) -> Result<Self> {
        if index >= self.n() {
            return invalid(format!("user index {index} out of range 0..{}", self.n()));
        }
        if user.m() != self.m || user.dim() != self.d {
            return invalid("replacement user does not match the dataset shape");
        }
        let mut out = self.clone();
        out.users[index] = user;
        out.provenance = None;
        Ok(out)
    }

    /// Writes the line-oriented text format described in the README.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{HEADER}")?;
        writeln!(w, "n {}", self.n())?;
        writeln!(w, "m {}", self.m)?;
        writeln!(w, "d {}", self.d)?;
        match &self.provenance {
            Some(p) => {
                writeln!(w, "seed {}", p.seed)?;
                writeln!(w, "distribution {}", p.distribution)?;
            }
            None => {
                writeln!(w, "seed -")?;
                writeln!(w, "distribution -")?;
            }
        }
        writeln!(w, "data")?;
        for user in &self.users {
            for sample in user.samples() {
                let row: Vec<String> = sample.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(line))) => Ok((i + 1, line)),
                Some((i, Err(e))) => Err(Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                }),
                None => Err(Error::Parse {
                    line: 0,
                    message: format!("unexpected end of input, expected {expect}"),
                }),
            }
        };
        let (line, header) = next("header")?;
        if header.trim() != HEADER {
            return Err(Error::Parse {
                line,
                message: format!("expected `{HEADER}`"),
            });
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (line, text) = next(key)?;
            match text.split_once(' ') {
                Some((k, v)) if k == key => Ok((line, v.trim().to_string())),
                _ => Err(Error::Parse {
                    line,
                    message: format!("expected `{key} <value>`"),
                }),
            }
        };
        let parse_count = |(line, v): (usize, String)| -> Result<usize> {
            v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid count `{v}`"),
            })
        };
        let n = parse_count(field("n")?)?;
        let m = parse_count(field("m")?)?;
        let d = parse_count(field("d")?)?;
        let (seed_line, seed) = field("seed")?;
        let (_, distribution) = field("distribution")?;
        let provenance = if seed == "-" {
            None
        } else {
            let seed = seed.parse().map_err(|_| Error::Parse {
                line: seed_line,
                message: format!("invalid seed `{seed}`"),
            })?;
            Some(Provenance { seed, distribution })
        };
        let (line, marker) = next("data")?;
        if marker.trim() != "data" {
            return Err(Error::Parse {
                line,
                message: "expected `data`".into(),
            });
        }
        let mut users = Vec::with_capacity(n);
        for _ in 0..n {
            let mut samples = Vec::with_capacity(m);
            for _ in 0..m {
                let (line, text) = next("sample row")?;
                let row = text
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<T>().map_err(|_| Error::Parse {
                            line,
                            message: format!("invalid number `{tok}`"),
                        })
                    })
                    .collect::<Result<Vec<T>>>()?;
                if row.len() != d {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected {d} values, found {}", row.len()),
                    });
                }
                samples.push(row);
            }
            users.push(UserRecord::new(samples)?);
        }
        let mut dataset = Dataset::new(users)?;
        dataset.provenance = provenance;
        Ok(dataset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset<f64> {
        let u0 = UserRecord::new(vec![vec![1.0, 2.0], vec![0.1, -3.5]]).unwrap();
        let u1 = UserRecord::new(vec![vec![1e-17, 2.5e300], vec![-0.0, 7.0]]).unwrap();
        Dataset::new(vec![u0, u1]).unwrap().with_provenance(Provenance {
            seed: 9,
            distribution: "gaussian-mean std=1 trunc=none mu=0,0".into(),
        })
    }

    #[test]
    fn text_round_trip_is_exact() {
        let ds = tiny();
        let mut buf = Vec::new();
        ds.write_text(&mut buf).unwrap();
        let back = Dataset::<f64>::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn rejects_ragged_users() {
        let u0 = UserRecord::new(vec![vec![1.0]]).unwrap();
        let u1 = UserRecord::new(vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(Dataset::new(vec![u0, u1]).is_err());
        assert!(UserRecord::<f64>::new(vec![]).is_err());
        assert!(UserRecord::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn reports_bad_row_line() {
        let text = "rdpsco-dataset v1\nn 1\nm 1\nd 2\nseed -\ndistribution -\ndata\n1.0 x\n";
        match Dataset::<f64>::read_text(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn replacement_produces_neighbor() {
        let ds = tiny();
        let user = UserRecord::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let nb = ds.with_user_replaced(1, user.clone()).unwrap();
        assert_eq!(nb.users()[0], ds.users()[0]);
        assert_eq!(nb.users()[1], user);
        assert!(ds.with_user_replaced(2, user).is_err());
    }
}

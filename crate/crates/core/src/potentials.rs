//! External potential fields V(x, z) with analytic gradients.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializable description of the external potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum PotentialKind {
    Free,
    /// V = strength * x^2 / 2 everywhere.
    HarmonicChannel {
        strength: f64,
    },
    /// V = strength * A(x) * B(z) / 2: a transverse well A switched on by a
    /// smooth window B over [z_on, z_off]. A(x) = x^2 - x^4 / (2 a^2) for
    /// |x| <= aperture and a^2 / 2 beyond, so the well flattens out at the rim.
    LensSlab {
        strength: f64,
        z_on: f64,
        z_off: f64,
        aperture: f64,
    },
    TabulatedGrid(GridSource),
}

/// A tabulated grid either inline or as a CSV file of (x, z, V) rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSource {
    Csv { csv: PathBuf },
    Inline(Grid),
}

impl PotentialSpec {
    pub fn free() -> Self {
        PotentialSpec {
            kind: PotentialKind::Free,
        }
    }

    pub fn harmonic(strength: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::HarmonicChannel { strength },
        }
    }

    /// Checks the invariants of the spec and builds an evaluator. Relative CSV
    /// paths are resolved against `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<PotentialField> {
        let field = "potential";
        match &self.kind {
            PotentialKind::Free => Ok(PotentialField::Free),
            PotentialKind::HarmonicChannel { strength } => {
                if !strength.is_finite() {
                    return Err(Error::invalid(field, "strength must be finite"));
                }
                Ok(PotentialField::Harmonic { strength: *strength })
            }
            PotentialKind::LensSlab {
                strength,
                z_on,
                z_off,
                aperture,
            } => {
                if !strength.is_finite() {
                    return Err(Error::invalid(field, "strength must be finite"));
                }
                if !(z_on.is_finite() && z_off.is_finite()) || z_on >= z_off {
                    return Err(Error::invalid(field, "z_on must be below z_off"));
                }
                if !(aperture.is_finite() && *aperture > 0.0) {
                    return Err(Error::invalid(field, "aperture must be > 0"));
                }
                Ok(PotentialField::Lens(LensSlab {
                    strength: *strength,
                    z_on: *z_on,
                    z_off: *z_off,
                    aperture: *aperture,
                }))
            }
            PotentialKind::TabulatedGrid(source) => {
                let grid = match source {
                    GridSource::Inline(grid) => grid.clone(),
                    GridSource::Csv { csv } => {
                        let path = match base_dir {
                            Some(dir) if csv.is_relative() => dir.join(csv),
                            _ => csv.clone(),
                        };
                        Grid::from_csv_path(&path)?
                    }
                };
                grid.check()?;
                Ok(PotentialField::Grid(Arc::new(grid)))
            }
        }
    }
}

/// Value and gradient of V at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PotentialSample {
    pub v: f64,
    pub dv_dx: f64,
    pub dv_dz: f64,
}

/// Ready-to-evaluate potential; immutable and cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialField {
    Free,
    Harmonic { strength: f64 },
    Lens(LensSlab),
    Grid(Arc<Grid>),
}

impl PotentialField {
    pub fn eval(&self, x: f64, z: f64) -> Result<PotentialSample> {
        match self {
            PotentialField::Free => Ok(PotentialSample::default()),
            PotentialField::Harmonic { strength } => Ok(PotentialSample {
                v: 0.5 * strength * x * x,
                dv_dx: strength * x,
                dv_dz: 0.0,
            }),
            PotentialField::Lens(lens) => Ok(lens.eval(x, z)),
            PotentialField::Grid(grid) => grid.eval(x, z),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, PotentialField::Free)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSlab {
    pub strength: f64,
    pub z_on: f64,
    pub z_off: f64,
    pub aperture: f64,
}

/// C1 smoothstep 3u^2 - 2u^3 on [0, 1], clamped outside; returns (s, ds/du).
fn smoothstep(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        (0.0, 0.0)
    } else if u >= 1.0 {
        (1.0, 0.0)
    } else {
        (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u))
    }
}

impl LensSlab {
    /// Ramp length at each end of the slab.
    pub fn ramp(&self) -> f64 {
        0.05 * (self.z_off - self.z_on)
    }

    /// Longitudinal window B(z) and its derivative.
    pub fn window(&self, z: f64) -> (f64, f64) {
        let d = self.ramp();
        let (up, dup) = smoothstep((z - self.z_on) / d);
        let (down, ddown) = smoothstep((self.z_off - z) / d);
        (up * down, (dup * down - up * ddown) / d)
    }

    /// Transverse profile A(x) and its derivative.
    pub fn profile(&self, x: f64) -> (f64, f64) {
        let a2 = self.aperture * self.aperture;
        if x.abs() >= self.aperture {
            (0.5 * a2, 0.0)
        } else {
            let x2 = x * x;
            (x2 - x2 * x2 / (2.0 * a2), 2.0 * x - 2.0 * x * x2 / a2)
        }
    }

    pub fn eval(&self, x: f64, z: f64) -> PotentialSample {
        let (b, db) = self.window(z);
        if b == 0.0 && db == 0.0 {
            return PotentialSample::default();
        }
        let (a, da) = self.profile(x);
        let half_k = 0.5 * self.strength;
        PotentialSample {
            v: half_k * a * b,
            dv_dx: half_k * da * b,
            dv_dz: half_k * a * db,
        }
    }
}

/// Rectangular grid of V samples; `v[ix][iz]` sits at `(x[ix], z[iz])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct GridRow {
    x: f64,
    z: f64,
    #[serde(rename = "V")]
    v: f64,
}

fn strictly_increasing(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite()) && a.windows(2).all(|w| w[0] < w[1])
}

/// Index `i` of the cell `[a[i], a[i+1]]` containing `t`, plus the local
/// coordinate in [0, 1] and the cell width.
fn locate(a: &[f64], t: f64) -> Option<(usize, f64, f64)> {
    let n = a.len();
    if !(t >= a[0] && t <= a[n - 1]) {
        return None;
    }
    let i = a.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2);
    let h = a[i + 1] - a[i];
    Some((i, (t - a[i]) / h, h))
}

impl Grid {
    /// Reads `x,z,V` rows. Every (x, z) pair of the rectangular lattice must
    /// appear exactly once; row order is free.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Grid> {
        let bad = |reason: String| Error::invalid("potential", reason);
        let mut rows = Vec::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (line, rec) in rdr.deserialize::<GridRow>().enumerate() {
            rows.push(rec.map_err(|e| bad(format!("grid row {}: {e}", line + 1)))?);
        }
        let axis = |get: fn(&GridRow) -> f64| {
            let mut a: Vec<f64> = rows.iter().map(get).collect();
            a.sort_by(f64::total_cmp);
            a.dedup();
            a
        };
        let xs = axis(|r| r.x);
        let zs = axis(|r| r.z);
        if xs.len() < 2 || zs.len() < 2 {
            return Err(bad("grid needs at least two distinct x and z values".into()));
        }
        if rows.len() != xs.len() * zs.len() {
            return Err(bad(format!(
                "grid has {} rows but {} x values and {} z values",
                rows.len(),
                xs.len(),
                zs.len()
            )));
        }
        let mut v = vec![vec![f64::NAN; zs.len()]; xs.len()];
        for r in &rows {
            let ix = xs.partition_point(|&a| a < r.x);
            let iz = zs.partition_point(|&a| a < r.z);
            if !v[ix][iz].is_nan() {
                return Err(bad(format!("duplicate grid point ({}, {})", r.x, r.z)));
            }
            v[ix][iz] = r.v;
        }
        Ok(Grid { x: xs, z: zs, v })
    }

    pub fn from_csv_path(path: &Path) -> Result<Grid> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::invalid("potential", format!("cannot open {}: {e}", path.display())))?;
        Grid::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn check(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("potential", reason));
        if self.x.len() < 2 || self.z.len() < 2 {
            return bad("grid needs at least two points per axis");
        }
        if !strictly_increasing(&self.x) || !strictly_increasing(&self.z) {
            return bad("grid axes must be strictly increasing");
        }
        if self.v.len() != self.x.len() || self.v.iter().any(|col| col.len() != self.z.len()) {
            return bad("grid values must have shape len(x) by len(z)");
        }
        if self.v.iter().flatten().any(|v| !v.is_finite()) {
            return bad("grid values must be finite");
        }
        Ok(())
    }

    /// Bilinear interpolation with the interpolant's own partial derivatives.
    pub fn eval(&self, x: f64, z: f64) -> Result<PotentialSample> {
        let (Some((i, u, hx)), Some((j, w, hz))) = (locate(&self.x, x), locate(&self.z, z)) else {
            return Err(Error::OutOfGrid { x, z });
        };
        let v00 = self.v[i][j];
        let v10 = self.v[i + 1][j];
        let v01 = self.v[i][j + 1];
        let v11 = self.v[i + 1][j + 1];
        Ok(PotentialSample {
            v: v00 * (1.0 - u) * (1.0 - w) + v10 * u * (1.0 - w) + v01 * (1.0 - u) * w + v11 * u * w,
            dv_dx: ((v10 - v00) * (1.0 - w) + (v11 - v01) * w) / hx,
            dv_dz: ((v01 - v00) * (1.0 - u) + (v11 - v10) * u) / hz,
        })
    }
}

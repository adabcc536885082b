//! Assembly of the banded generalized eigenproblem `A x = E B x`.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::algebra::poly::rat_to_f64;
use crate::algebra::{Channel, EffectiveHamiltonian, ExchangeSector, Unknown, YzSymmetry};
use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::sturmian::{
    symmetrize, AxisStencils, BasisTruncation, ScaleParams, Stencil1D, SturmianIndex,
};
use crate::systems::ReducedMasses;

/// One state of the sector basis: a radial unknown and a canonical index
/// (`n_y <= n_z` for restricted unknowns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub block: usize,
    pub q: SturmianIndex,
}

/// Band ordering strategies. Both are evaluated and the narrower one is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// By `(max(n_y,n_z), min(n_y,n_z), n_x, sign(n_y-n_z), block)`.
    Radial,
    /// By `(n_y-n_z, n_x, n_y+n_z, block)`.
    Diagonal,
}

impl Ordering {
    fn key(self, s: &BasisState) -> (i64, i64, i64, i64, i64) {
        let (x, y, z) = (s.q.nx as i64, s.q.ny as i64, s.q.nz as i64);
        match self {
            Ordering::Radial => (y.max(z), y.min(z), x, (y - z).signum(), s.block as i64),
            Ordering::Diagonal => (y - z, x, y + z, s.block as i64, 0),
        }
    }
}

/// Sector basis over all unknowns, in band order.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub n: u32,
    pub n_x: u32,
    pub unknowns: Vec<Unknown>,
    pub states: Vec<BasisState>,
    pub ordering: Ordering,
    lookup: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl SectorBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    fn slot(&self, block: usize, q: &SturmianIndex) -> Option<usize> {
        let s = (self.n + 1) as usize;
        if q.nx > self.n_x || q.total() > self.n {
            return None;
        }
        Some(
            ((block * (self.n_x as usize + 1) + q.nx as usize) * s + q.ny as usize) * s
                + q.nz as usize,
        )
    }

    /// Position of the sector state containing product state `q` of `block`,
    /// with the sign of `q` in that state's expansion.
    pub fn locate(&self, block: usize, q: &SturmianIndex) -> Option<(usize, f64)> {
        let yz = self.unknowns.get(block)?.yz;
        let (canon, sign) = match yz {
            YzSymmetry::None => (*q, 1.0),
            YzSymmetry::Symmetric if q.ny <= q.nz => (*q, 1.0),
            YzSymmetry::Symmetric => (q.swapped(), 1.0),
            YzSymmetry::Antisymmetric if q.ny == q.nz => return None,
            YzSymmetry::Antisymmetric if q.ny < q.nz => (*q, 1.0),
            YzSymmetry::Antisymmetric => (q.swapped(), -1.0),
        };
        let p = self.lookup[self.slot(block, &canon)?];
        (p != ABSENT).then_some((p as usize, sign))
    }

    /// Product-state expansion of a basis state.
    pub fn expansion(&self, pos: usize) -> Vec<(f64, SturmianIndex)> {
        let s = self.states[pos];
        symmetrize(s.q, self.unknowns[s.block].yz).expect("canonical states are valid")
    }

    fn reorder(&mut self, ordering: Ordering) {
        self.states.sort_by_key(|s| ordering.key(s));
        self.ordering = ordering;
        self.lookup.iter_mut().for_each(|v| *v = ABSENT);
        for (i, st) in self.states.iter().enumerate() {
            let k = self.slot(st.block, &st.q).unwrap();
            self.lookup[k] = i as u32;
        }
    }
}

/// Build the sector basis of a Hamiltonian for a given truncation.
pub fn sector_basis(ham: &EffectiveHamiltonian, n: u32, n_x: u32) -> Result<SectorBasis> {
    let mut states = Vec::new();
    for (block, u) in ham.unknowns.iter().enumerate() {
        let trunc = BasisTruncation::new(n, n_x, u.yz)?;
        for q in crate::sturmian::enumerate_basis(&trunc)? {
            states.push(BasisState { block, q });
        }
    }
    let s = (n + 1) as usize;
    let mut basis = SectorBasis {
        n,
        n_x,
        unknowns: ham.unknowns.clone(),
        states,
        ordering: Ordering::Radial,
        lookup: vec![ABSENT; ham.unknowns.len() * (n_x as usize + 1) * s * s],
    };
    basis.reorder(Ordering::Radial);
    Ok(basis)
}

/// Offsets between the left index and the (possibly swapped) right index, per
/// `(row block, col block, swap)`.
fn offset_table(ham: &EffectiveHamiltonian) -> Vec<(usize, usize, bool, Vec<[i32; 3]>)> {
    let mut sets: std::collections::BTreeMap<(usize, usize, bool), BTreeSet<[i32; 3]>> =
        Default::default();
    for t in &ham.terms {
        let e = t.exps.map(|v| v as i32);
        let set = sets.entry((t.row, t.col, t.swap)).or_default();
        for dx in -e[0]..=e[0] {
            for dy in -e[1]..=e[1] {
                for dz in -e[2]..=e[2] {
                    set.insert([dx, dy, dz]);
                }
            }
        }
    }
    sets.into_iter()
        .map(|((r, c, s), v)| (r, c, s, v.into_iter().collect()))
        .collect()
}

fn shifted(q: &SturmianIndex, d: &[i32; 3]) -> Option<SturmianIndex> {
    let a = q.nx as i32 + d[0];
    let b = q.ny as i32 + d[1];
    let c = q.nz as i32 + d[2];
    (a >= 0 && b >= 0 && c >= 0).then(|| SturmianIndex::new(a as u32, b as u32, c as u32))
}

/// Visit every structurally coupled column of row `i` (both triangles).
fn for_each_neighbor(
    basis: &SectorBasis,
    table: &[(usize, usize, bool, Vec<[i32; 3]>)],
    i: usize,
    mut f: impl FnMut(usize),
) {
    let st = basis.states[i];
    for (_, q) in basis.expansion(i) {
        for (row, col, swap, offs) in table {
            if *row != st.block {
                continue;
            }
            for d in offs {
                if let Some(t) = shifted(&q, d) {
                    let r = if *swap { t.swapped() } else { t };
                    if let Some((j, _)) = basis.locate(*col, &r) {
                        f(j);
                    }
                }
            }
        }
    }
}

fn band_width(basis: &SectorBasis, table: &[(usize, usize, bool, Vec<[i32; 3]>)]) -> usize {
    let mut w = 0;
    for i in 0..basis.dim() {
        for_each_neighbor(basis, table, i, |j| w = w.max(i.abs_diff(j)));
    }
    w
}

/// Choose the band ordering: both candidate orderings are evaluated and the one
/// with the smaller width is kept (ties go to the radial ordering).
pub fn choose_ordering(basis: &mut SectorBasis, ham: &EffectiveHamiltonian) -> usize {
    let table = offset_table(ham);
    basis.reorder(Ordering::Radial);
    let w_radial = band_width(basis, &table);
    basis.reorder(Ordering::Diagonal);
    let w_diag = band_width(basis, &table);
    if w_radial <= w_diag {
        basis.reorder(Ordering::Radial);
        w_radial
    } else {
        w_diag
    }
}

pub use crate::algebra::hamiltonian::CouplingOffsets;

pub fn coupling_offsets(ham: &EffectiveHamiltonian) -> CouplingOffsets {
    ham.coupling_offsets()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairMeta {
    pub species: String,
    pub j: u32,
    pub sector: ExchangeSector,
    pub n: u32,
    pub n_x: u32,
    pub scales: ScaleParams,
    pub unknowns: Vec<Unknown>,
}

/// Assembled matrices. `A = a_electron + a_nuclear / mu12 + a_symbreak / mu0`.
#[derive(Debug, Clone)]
pub struct BandedPair {
    /// Electron kinetic energy plus Coulomb interaction.
    pub a_electron: BandedMatrix,
    pub a_nuclear: BandedMatrix,
    pub a_symbreak: BandedMatrix,
    pub b: BandedMatrix,
    /// `B`-norm of each sector basis function. Stored entries are divided by
    /// `norm[i] * norm[j]`, so `B` has a unit diagonal.
    pub norm: Vec<f64>,
    pub meta: PairMeta,
    pub basis: SectorBasis,
}

impl BandedPair {
    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    pub fn width(&self) -> usize {
        self.b.width()
    }

    pub fn a(&self, masses: &ReducedMasses) -> BandedMatrix {
        BandedMatrix::combine(&[
            (1.0, &self.a_electron),
            (masses.inv_mu12(), &self.a_nuclear),
            (masses.inv_mu0, &self.a_symbreak),
        ])
    }
}

struct CompiledTerm<'a> {
    slot: usize,
    swap: bool,
    coeff: f64,
    factors: [(&'a Stencil1D, bool); 3],
}

/// Add the contributions of one term from product state `ql` of row `i` to
/// every column `j <= i` it reaches.
#[allow(clippy::too_many_arguments)]
fn scatter_term(
    basis: &SectorBasis,
    t: &CompiledTerm,
    col_block: usize,
    i: usize,
    wl: f64,
    ql: &SturmianIndex,
    w1: usize,
    out: &mut [&mut [f64]; 4],
) {
    let value = |a: usize, n: i64| -> f64 {
        let (s, transposed) = t.factors[a];
        if n < 0 {
            return 0.0;
        }
        let m = ql.axis(a) as usize;
        if transposed {
            s.get(n as usize, m)
        } else {
            s.get(m, n as usize)
        }
    };
    let h = t.factors.map(|(s, _)| s.half_bandwidth as i64);
    let base = [ql.nx as i64, ql.ny as i64, ql.nz as i64];
    let sqrt_half = std::f64::consts::FRAC_1_SQRT_2;
    for nx in base[0] - h[0]..=base[0] + h[0] {
        let vx = value(0, nx);
        if vx == 0.0 {
            continue;
        }
        for ny in base[1] - h[1]..=base[1] + h[1] {
            let vy = value(1, ny);
            if vy == 0.0 {
                continue;
            }
            for nz in base[2] - h[2]..=base[2] + h[2] {
                if nz < 0 {
                    continue;
                }
                // the factor acts on S^swap of the column product state
                let target = SturmianIndex::new(nx as u32, ny as u32, nz as u32);
                let qr = if t.swap { target.swapped() } else { target };
                let Some((j, sign)) = basis.locate(col_block, &qr) else {
                    continue;
                };
                if j > i {
                    continue;
                }
                let vz = value(2, nz);
                if vz == 0.0 {
                    continue;
                }
                let wr = if basis.unknowns[col_block].yz == YzSymmetry::None || qr.ny == qr.nz {
                    sign
                } else {
                    sign * sqrt_half
                };
                out[t.slot][w1 - 1 - (i - j)] += t.coeff * wl * wr * vx * vy * vz;
            }
        }
    }
}

/// Assemble `A` (by mass channel) and `B` over the sector basis.
pub fn assemble(
    ham: &EffectiveHamiltonian,
    n: u32,
    n_x: u32,
    scales: ScaleParams,
    species: &str,
) -> Result<BandedPair> {
    let mut basis = sector_basis(ham, n, n_x)?;
    let width = choose_ordering(&mut basis, ham);
    let kmax = ham.max_degree();
    let size = n as usize + 1;
    let axes = [
        AxisStencils::new(scales.alpha, kmax, size)?,
        AxisStencils::new(scales.beta, kmax, size)?,
    ];
    let nb = ham.unknowns.len();
    // compiled terms grouped by (row block, col block)
    let mut groups: Vec<Vec<CompiledTerm>> = (0..nb * nb).map(|_| Vec::new()).collect();
    for t in &ham.terms {
        let slot = match t.channel {
            Channel::Electron | Channel::Coulomb => 0,
            Channel::Nuclear => 1,
            Channel::SymmetryBreaking => 2,
            Channel::Overlap => 3,
        };
        let mut factors = Vec::with_capacity(3);
        for a in 0..3 {
            let l = t.left == Some(a as u8);
            let r = t.right == Some(a as u8);
            let s = axes[a.min(1)]
                .factor(l, r, t.exps[a])
                .map_err(|e| Error::Assembly(format!("term {t:?}: {e}")))?;
            factors.push((s, l && !r));
        }
        groups[t.row * nb + t.col].push(CompiledTerm {
            slot,
            swap: t.swap,
            coeff: rat_to_f64(&t.coeff),
            factors: [factors[0], factors[1], factors[2]],
        });
    }
    let dim = basis.dim();
    let mut mats: Vec<BandedMatrix> = (0..4).map(|_| BandedMatrix::zeros(dim, width)).collect();
    let w1 = mats[0].width() + 1;
    {
        let [m0, m1, m2, m3] = &mut mats[..] else {
            unreachable!()
        };
        let rows: Vec<_> = m0
            .rows_mut()
            .zip(m1.rows_mut())
            .zip(m2.rows_mut())
            .zip(m3.rows_mut())
            .map(|(((a, b), c), d)| [a, b, c, d])
            .collect();
        let basis = &basis;
        let groups = &groups;
        rows.into_par_iter().enumerate().for_each(|(i, mut out)| {
            let bi = basis.states[i].block;
            for (wl, ql) in basis.expansion(i) {
                for bj in 0..nb {
                    for t in &groups[bi * nb + bj] {
                        scatter_term(basis, t, bj, i, wl, &ql, w1, &mut out);
                    }
                }
            }
        });
    }
    // unit-normalized basis functions keep the J = 2 pencils usable in double precision
    let norm: Vec<f64> = (0..dim).map(|i| mats[3].get(i, i).sqrt()).collect();
    if let Some(i) = norm.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Assembly(format!(
            "basis function {i} has non-positive overlap"
        )));
    }
    let inv: Vec<f64> = norm.iter().map(|v| 1.0 / v).collect();
    for m in &mut mats {
        m.scale_symmetric(&inv);
    }
    let b = mats.pop().unwrap();
    let a_symbreak = mats.pop().unwrap();
    let a_nuclear = mats.pop().unwrap();
    let a_electron = mats.pop().unwrap();
    Ok(BandedPair {
        a_electron,
        a_nuclear,
        a_symbreak,
        b,
        norm,
        meta: PairMeta {
            species: species.to_string(),
            j: ham.j,
            sector: ham.sector,
            n,
            n_x,
            scales,
            unknowns: ham.unknowns.clone(),
        },
        basis,
    })
}

const MAGIC: &[u8; 8] = b"MOLIONBP";
const VERSION: u32 = 2;

fn meta_text(m: &PairMeta) -> String {
    let unknowns: Vec<String> = m
        .unknowns
        .iter()
        .map(|u| format!("{}:{}", u.name, u.yz.tag()))
        .collect();
    format!(
        "species={}\nj={}\nsector={}\nn={}\nn_x={}\nalpha={:e}\nbeta={:e}\nunknowns={}\n",
        m.species,
        m.j,
        m.sector,
        m.n,
        m.n_x,
        m.scales.alpha,
        m.scales.beta,
        unknowns.join(",")
    )
}

fn parse_meta(text: &str) -> Result<PairMeta> {
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| {
        map.get(k)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("missing metadata key {k}")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Parse(format!("bad metadata value for {k}")))
    };
    let unknowns = get("unknowns")?
        .split(',')
        .map(|s| {
            let (n, y) = s
                .split_once(':')
                .ok_or_else(|| Error::Parse("bad unknown".into()))?;
            Ok(Unknown {
                name: n.to_string(),
                yz: y.parse()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairMeta {
        species: get("species")?,
        j: num("j")? as u32,
        sector: get("sector")?.parse()?,
        n: num("n")? as u32,
        n_x: num("n_x")? as u32,
        scales: ScaleParams::new(num("alpha")?, num("beta")?)?,
        unknowns,
    })
}

/// Write the four band matrices with a metadata header, little-endian.
pub fn write_pair(pair: &BandedPair, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    let meta = meta_text(&pair.meta);
    f.write_all(&(meta.len() as u64).to_le_bytes())?;
    f.write_all(meta.as_bytes())?;
    for m in [&pair.a_electron, &pair.a_nuclear, &pair.a_symbreak, &pair.b] {
        f.write_all(&(m.dim() as u64).to_le_bytes())?;
        f.write_all(&(m.width() as u64).to_le_bytes())?;
        for v in m.raw() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    for v in &pair.norm {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Read a dump written by [`write_pair`], rebuilding the basis from the metadata.
pub fn read_pair(path: &Path, ham: &EffectiveHamiltonian) -> Result<BandedPair> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a banded pair dump".into()));
    }
    let mut u4 = [0u8; 4];
    f.read_exact(&mut u4)?;
    if u32::from_le_bytes(u4) != VERSION {
        return Err(Error::Parse("unsupported dump version".into()));
    }
    let mut u8b = [0u8; 8];
    let mut read_u64 = |f: &mut dyn Read| -> Result<u64> {
        f.read_exact(&mut u8b)?;
        Ok(u64::from_le_bytes(u8b))
    };
    let len = read_u64(&mut f)? as usize;
    let mut meta = vec![0u8; len];
    f.read_exact(&mut meta)?;
    let meta = parse_meta(&String::from_utf8_lossy(&meta))?;
    let mut mats = Vec::new();
    for _ in 0..4 {
        let n = read_u64(&mut f)? as usize;
        let w = read_u64(&mut f)? as usize;
        let mut data = vec![0.0; n * (w + 1)];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            f.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        mats.push(BandedMatrix::from_raw(n, w, data)?);
    }
    let mut norm = vec![0.0; mats[0].dim()];
    let mut buf = [0u8; 8];
    for v in norm.iter_mut() {
        f.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    if ham.j != meta.j || ham.sector != meta.sector {
        return Err(Error::Parse("dump does not match the Hamiltonian".into()));
    }
    let mut basis = sector_basis(ham, meta.n, meta.n_x)?;
    choose_ordering(&mut basis, ham);
    let b = mats.pop().unwrap();
    let a_symbreak = mats.pop().unwrap();
    let a_nuclear = mats.pop().unwrap();
    let a_electron = mats.pop().unwrap();
    Ok(BandedPair {
        a_electron,
        a_nuclear,
        a_symbreak,
        b,
        norm,
        meta,
        basis,
    })
}

//! Text file formats: generating vectors, merit sidecars, point dumps,
//! plan files, and weight / integrand configuration blocks.
//!
//! Key-value files hold one `key=value` per line; blank lines and lines
//! starting with `#` are ignored. Every writer ends lines with `\n`.

use std::io::{BufRead, BufReader, Read, Write};

use crate::cbc::MeritReport;
use crate::error::{Error, Result};
use crate::gfpoly::Poly;
use crate::infdim::{FixedPlan, Level, MultilevelPlan};
use crate::polylattice::GeneratingVector;
use crate::scramble::ScrambleSpec;
use crate::wspace::{Beta, Shape, WeightSequence};

fn content_lines<R: Read>(r: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

fn split_kv(line: &str) -> Result<(&str, &str)> {
    line.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::Parse(format!("expected key=value, got {line:?}")))
}

fn parse_num<V: std::str::FromStr>(key: &str, v: &str) -> Result<V> {
    v.parse().map_err(|_| Error::Parse(format!("bad value for {key}: {v:?}")))
}

/// Comma-separated reals.
pub fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| parse_num("list entry", t.trim())).collect()
}

pub fn write_vector<W: Write>(mut w: W, g: &GeneratingVector) -> Result<()> {
    writeln!(w, "b={}", g.base())?;
    writeln!(w, "m={}", g.m())?;
    writeln!(w, "p={}", g.modulus().to_hex())?;
    for q in g.components() {
        writeln!(w, "q={}", q.to_hex())?;
    }
    Ok(())
}

pub fn read_vector<R: Read>(r: R) -> Result<GeneratingVector> {
    let (mut m, mut p, mut q) = (None, None, Vec::new());
    for line in content_lines(r)? {
        let (k, v) = split_kv(&line)?;
        match k {
            "b" if v == "2" => {}
            "b" => return Err(Error::Config(format!("only base 2 is supported, file has b={v}"))),
            "m" => m = Some(parse_num::<u32>(k, v)?),
            "p" => p = Some(Poly::from_hex(v)?),
            "q" => q.push(Poly::from_hex(v)?),
            other => return Err(Error::Parse(format!("unknown key {other:?} in vector file"))),
        }
    }
    let m = m.ok_or_else(|| Error::Parse("vector file lacks m=".into()))?;
    let p = p.ok_or_else(|| Error::Parse("vector file lacks p=".into()))?;
    GeneratingVector::new(m, p, q)
}

/// CSV with columns `dimension,q_hex,e2`.
pub fn write_merit<W: Write>(w: W, report: &MeritReport) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["dimension", "q_hex", "e2"])?;
    for (j, (q, e2)) in report.q.iter().zip(&report.e2).enumerate() {
        wr.write_record([(j + 1).to_string(), q.to_hex(), e2.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// `(q_j, e2_j)` rows of a merit file.
pub fn read_merit<R: Read>(r: R) -> Result<Vec<(Poly, f64)>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Parse(format!("merit row {} has {} fields", i + 1, rec.len())));
        }
        let dim: usize = parse_num("dimension", &rec[0])?;
        if dim != i + 1 {
            return Err(Error::Parse(format!("merit rows out of order at dimension {dim}")));
        }
        out.push((Poly::from_hex(&rec[1])?, parse_num("e2", &rec[2])?));
    }
    Ok(out)
}

/// One point per row. Scrambled dumps carry the randomization in `#` lines.
pub fn write_points<W: Write, T: std::fmt::Display>(
    mut w: W,
    values: &[T],
    s: usize,
    spec: Option<&ScrambleSpec>,
) -> Result<()> {
    if s == 0 || !values.len().is_multiple_of(s) {
        return Err(Error::Dimension(format!("{} values do not form rows of {s}", values.len())));
    }
    if let Some(sp) = spec {
        writeln!(w, "# kind={}", sp.kind.name())?;
        writeln!(w, "# depth={}", sp.depth)?;
        writeln!(w, "# seed={}", sp.seed)?;
        writeln!(w, "# replicate_id={}", sp.replicate_id)?;
    }
    for row in values.chunks(s) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn read_points<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    content_lines(r)?.iter().map(|l| parse_real_list(l)).collect()
}

/// A fixed or multilevel plan.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanFile {
    Fixed(FixedPlan),
    Multilevel(MultilevelPlan),
}

impl PlanFile {
    pub fn anchor(&self) -> f64 {
        match self {
            PlanFile::Fixed(p) => p.anchor,
            PlanFile::Multilevel(p) => p.anchor,
        }
    }
}

pub fn write_plan<W: Write>(mut w: W, plan: &PlanFile) -> Result<()> {
    let (kind, budget, alpha, eps, anchor) = match plan {
        PlanFile::Fixed(p) => ("fixed", p.budget, p.alpha, p.eps, p.anchor),
        PlanFile::Multilevel(p) => ("ml", p.budget, p.alpha, p.eps, p.anchor),
    };
    writeln!(w, "type={kind}")?;
    writeln!(w, "N={budget}")?;
    writeln!(w, "alpha={alpha}")?;
    writeln!(w, "eps={eps}")?;
    writeln!(w, "anchor={anchor}")?;
    match plan {
        PlanFile::Fixed(p) => {
            writeln!(w, "n={}", p.n)?;
            writeln!(w, "s={}", p.s)?;
        }
        PlanFile::Multilevel(p) => {
            for (l, lv) in p.levels.iter().enumerate() {
                writeln!(w, "level {}: s={} n={}", l + 1, lv.s, lv.n)?;
            }
        }
    }
    Ok(())
}

fn parse_level(line: &str, expected: usize) -> Result<Level> {
    let bad = || Error::Parse(format!("bad level line {line:?}"));
    let rest = line.strip_prefix("level").ok_or_else(bad)?;
    let (idx, fields) = rest.split_once(':').ok_or_else(bad)?;
    if parse_num::<usize>("level", idx.trim())? != expected {
        return Err(Error::Parse(format!("expected level {expected} in {line:?}")));
    }
    let (mut s, mut n) = (None, None);
    for tok in fields.split_whitespace() {
        let (k, v) = split_kv(tok)?;
        match k {
            "s" => s = Some(parse_num(k, v)?),
            "n" => n = Some(parse_num(k, v)?),
            _ => return Err(bad()),
        }
    }
    Ok(Level { s: s.ok_or_else(bad)?, n: n.ok_or_else(bad)? })
}

pub fn read_plan<R: Read>(r: R) -> Result<PlanFile> {
    let (mut kind, mut budget, mut alpha, mut eps, mut anchor) = (None, None, f64::NAN, f64::NAN, None);
    let (mut n, mut s, mut levels) = (None, None, Vec::new());
    for line in content_lines(r)? {
        if line.starts_with("level") {
            levels.push(parse_level(&line, levels.len() + 1)?);
            continue;
        }
        let (k, v) = split_kv(&line)?;
        match k {
            "type" => kind = Some(v.to_string()),
            "N" => budget = Some(parse_num::<u64>(k, v)?),
            "alpha" => alpha = parse_num(k, v)?,
            "eps" => eps = parse_num(k, v)?,
            "anchor" => anchor = Some(parse_num::<f64>(k, v)?),
            "n" => n = Some(parse_num::<usize>(k, v)?),
            "s" => s = Some(parse_num::<usize>(k, v)?),
            other => return Err(Error::Parse(format!("unknown key {other:?} in plan file"))),
        }
    }
    let budget = budget.ok_or_else(|| Error::Parse("plan file lacks N=".into()))?;
    let anchor = anchor.unwrap_or(0.5);
    match kind.as_deref() {
        Some("fixed") => {
            let n = n.ok_or_else(|| Error::Parse("fixed plan lacks n=".into()))?;
            let s = s.ok_or_else(|| Error::Parse("fixed plan lacks s=".into()))?;
            let mut p = FixedPlan::new(budget, n, s, anchor)?;
            p.alpha = alpha;
            p.eps = eps;
            Ok(PlanFile::Fixed(p))
        }
        Some("ml") => Ok(PlanFile::Multilevel(MultilevelPlan::new(budget, alpha, eps, anchor, levels)?)),
        other => Err(Error::Parse(format!("plan type must be fixed or ml, got {other:?}"))),
    }
}

/// Weight block: `gamma=<list>` (with `alpha` as the decay beyond the list)
/// or `cscale * j^-alpha`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightConfig {
    pub alpha: Option<f64>,
    pub cscale: Option<f64>,
    pub gamma: Option<Vec<f64>>,
}

impl WeightConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = WeightConfig::default();
        for line in content_lines(text.as_bytes())? {
            let (k, v) = split_kv(&line)?;
            match k {
                "alpha" => c.alpha = Some(parse_num(k, v)?),
                "cscale" => c.cscale = Some(parse_num(k, v)?),
                "gamma" => c.gamma = Some(parse_real_list(v)?),
                _ => {}
            }
        }
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(a) = self.alpha {
            s += &format!("alpha={a}\n");
        }
        if let Some(c) = self.cscale {
            s += &format!("cscale={c}\n");
        }
        if let Some(g) = &self.gamma {
            s += &format!("gamma={}\n", g.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        }
        s
    }

    pub fn weights(&self) -> Result<WeightSequence<f64>> {
        match (&self.gamma, self.alpha) {
            (Some(g), tail) => {
                if self.cscale.is_some() {
                    return Err(Error::Config("cscale applies to power-law weights, not a gamma list".into()));
                }
                WeightSequence::explicit(g.clone(), tail)
            }
            (None, Some(a)) => WeightSequence::power_law(self.cscale.unwrap_or(1.0), a),
            (None, None) => Err(Error::Config("weights need alpha= or gamma=".into())),
        }
    }
}

/// Integrand block: `shape=linear|quadratic`, `beta=<real or list>`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandConfig {
    pub shape: Shape,
    pub beta: Beta<f64>,
}

impl Default for IntegrandConfig {
    fn default() -> Self {
        Self { shape: Shape::Linear, beta: Beta::default() }
    }
}

/// `1.5` is a constant, `1,0.5` a list.
pub fn parse_beta(v: &str) -> Result<Beta<f64>> {
    let vals = parse_real_list(v)?;
    Ok(if vals.len() == 1 && !v.contains(',') { Beta::Constant(vals[0]) } else { Beta::List(vals) })
}

impl IntegrandConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = IntegrandConfig::default();
        for line in content_lines(text.as_bytes())? {
            let (k, v) = split_kv(&line)?;
            match k {
                "shape" => c.shape = Shape::parse(v)?,
                "beta" => c.beta = parse_beta(v)?,
                _ => {}
            }
        }
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let beta = match &self.beta {
            Beta::Constant(b) => b.to_string(),
            Beta::List(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        };
        format!("shape={}\nbeta={beta}\n", self.shape.name())
    }
}

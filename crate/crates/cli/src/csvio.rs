//! CSV records. Every real is written with 17 significant digits, which is
//! enough for an exact `f64` round trip.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use starrad::train::TraceRow;

/// A row type with a fixed header.
pub trait Record: Sized {
    const HEADER: &'static [&'static str];

    fn fields(&self) -> Vec<String>;

    fn parse(fields: &[&str]) -> Result<Self>;
}

/// `x` with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_real(s: &str) -> Result<f64> {
    s.trim().parse().with_context(|| format!("invalid number `{s}`"))
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| anyhow::anyhow!("invalid integer `{s}`"))
}

pub fn write_records<R: Record, W: Write>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Record, I: Read>(input: I) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != R::HEADER {
        bail!("unexpected header {header:?}, expected {:?}", R::HEADER);
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        rows.push(R::parse(&fields)?);
    }
    Ok(rows)
}

pub fn write_file<R: Record>(path: &Path, rows: &[R]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_records(file, rows).with_context(|| format!("writing {}", path.display()))
}

pub fn read_file<R: Record>(path: &Path) -> Result<Vec<R>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(file).with_context(|| format!("reading {}", path.display()))
}

fn expect_len(fields: &[&str], n: usize) -> Result<()> {
    if fields.len() != n {
        bail!("expected {n} fields, got {}", fields.len());
    }
    Ok(())
}

impl Record for TraceRow {
    const HEADER: &'static [&'static str] = &["epoch", "train_loss", "l2_test_error", "seconds"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.epoch().to_string(),
            real(self.train_loss),
            real(self.l2_test_error),
            real(self.seconds),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        expect_len(f, 4)?;
        Ok(TraceRow {
            epoch: parse_int::<usize>(f[0])? as f64,
            train_loss: parse_real(f[1])?,
            l2_test_error: parse_real(f[2])?,
            seconds: parse_real(f[3])?,
        })
    }
}

/// One sub-interval of a refined-rule allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanRow {
    pub j: usize,
    pub lo: f64,
    pub hi: f64,
    pub max_abs_fpp: f64,
    pub trapezoids: usize,
}

impl Record for PlanRow {
    const HEADER: &'static [&'static str] = &["j", "lo", "hi", "max_abs_fpp", "trapezoids"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.j.to_string(),
            real(self.lo),
            real(self.hi),
            real(self.max_abs_fpp),
            self.trapezoids.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        expect_len(f, 5)?;
        Ok(Self {
            j: parse_int(f[0])?,
            lo: parse_real(f[1])?,
            hi: parse_real(f[2])?,
            max_abs_fpp: parse_real(f[3])?,
            trapezoids: parse_int(f[4])?,
        })
    }
}

/// Both rules at one `(N, k)`. Relative errors are in percent.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRow {
    pub function: String,
    pub n: usize,
    pub k: usize,
    pub samples: usize,
    pub reference: f64,
    pub estimate_uniform: f64,
    pub estimate_refined: f64,
    pub rel_err_uniform: f64,
    pub rel_err_refined: f64,
    pub bound_uniform: f64,
    pub bound_refined: f64,
}

impl Record for QuadRow {
    const HEADER: &'static [&'static str] = &[
        "function",
        "n",
        "k",
        "samples",
        "reference",
        "estimate_uniform",
        "estimate_refined",
        "rel_err_uniform_pct",
        "rel_err_refined_pct",
        "bound_uniform",
        "bound_refined",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.function.clone(),
            self.n.to_string(),
            self.k.to_string(),
            self.samples.to_string(),
            real(self.reference),
            real(self.estimate_uniform),
            real(self.estimate_refined),
            real(self.rel_err_uniform),
            real(self.rel_err_refined),
            real(self.bound_uniform),
            real(self.bound_refined),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        expect_len(f, 11)?;
        Ok(Self {
            function: f[0].to_string(),
            n: parse_int(f[1])?,
            k: parse_int(f[2])?,
            samples: parse_int(f[3])?,
            reference: parse_real(f[4])?,
            estimate_uniform: parse_real(f[5])?,
            estimate_refined: parse_real(f[6])?,
            rel_err_uniform: parse_real(f[7])?,
            rel_err_refined: parse_real(f[8])?,
            bound_uniform: parse_real(f[9])?,
            bound_refined: parse_real(f[10])?,
        })
    }
}

/// Test error of one run at one checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub criterion: String,
    pub seed: u64,
    pub epoch: usize,
    pub l2_test_error: f64,
}

impl Record for ComparisonRow {
    const HEADER: &'static [&'static str] = &["criterion", "seed", "epoch", "l2_test_error"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.criterion.clone(),
            self.seed.to_string(),
            self.epoch.to_string(),
            real(self.l2_test_error),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        expect_len(f, 4)?;
        Ok(Self {
            criterion: f[0].to_string(),
            seed: parse_int(f[1])?,
            epoch: parse_int(f[2])?,
            l2_test_error: parse_real(f[3])?,
        })
    }
}

/// Squared error of the trained network at one test-grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub squared_error: f64,
}

impl Record for FieldRow {
    const HEADER: &'static [&'static str] = &["x", "y", "squared_error"];

    fn fields(&self) -> Vec<String> {
        vec![real(self.x), real(self.y), real(self.squared_error)]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        expect_len(f, 3)?;
        Ok(Self {
            x: parse_real(f[0])?,
            y: parse_real(f[1])?,
            squared_error: parse_real(f[2])?,
        })
    }
}

//! Serial-vs-parallel timing harness with output checksums.
//!
//! Every case is timed as the median of `repeats` runs after one warm-up,
//! for both the serial oracle and the parallel kernel at the requested
//! worker count. A case whose parallel output hashes differently from the
//! oracle aborts the report.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::time::Instant;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blur::{box_blur_boundary_safe, gaussian_filter, BoxBlurSpec, GaussianSpec};
use crate::drs::{fuse, TransparencyMap};
use crate::error::{Error, Result};
use crate::oracle::{box_blur_oracle, fuse_oracle, gaussian_oracle, rotate_oracle};
use crate::parallel::{available_cores, Parallelism};
use crate::rotate::{rotate, InterpMode, RotationSpec};
use crate::tensor::{Dims, ImageU8, Tensor4D};

pub const MIN_REPEATS: usize = 5;

/// Inputs and outputs handed to benchmark kernels.
#[derive(Debug, Clone)]
pub enum Payload {
    Image(ImageU8),
    Tensor(Tensor4D),
    Fusion {
        p: TransparencyMap,
        fuzzy: Tensor4D,
        original: Tensor4D,
    },
}

impl Payload {
    /// 64-bit FNV-1a over the output bytes.
    pub fn checksum(&self) -> u64 {
        let mut h = FnvHasher::default();
        match self {
            Payload::Image(img) => h.write(img.data()),
            Payload::Tensor(t) => {
                for v in t.data() {
                    h.write(&v.to_le_bytes());
                }
            }
            Payload::Fusion { p, fuzzy, original } => {
                for t in [p.grid(), fuzzy, original] {
                    for v in t.data() {
                        h.write(&v.to_le_bytes());
                    }
                }
            }
        }
        h.finish()
    }
}

/// A kernel with a serial reference and a parallel implementation.
pub trait BenchKernel: Sync {
    fn name(&self) -> &str;
    /// Deterministic `size × size` input.
    fn input(&self, size: usize) -> Payload;
    fn serial(&self, input: &Payload) -> Payload;
    fn parallel(&self, input: &Payload, par: Parallelism) -> Payload;
}

fn rng_for(size: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xB10B ^ size as u64)
}

fn random_plane(size: usize, channels: usize) -> Tensor4D {
    let mut rng = rng_for(size);
    Tensor4D::from_fn(Dims::new(1, channels, size, size).expect("size >= 1"), |_, _, _, _| rng.gen())
}

macro_rules! expect_payload {
    ($p:expr, $variant:ident) => {
        match $p {
            Payload::$variant(x) => x,
            other => panic!("unexpected payload {other:?}"),
        }
    };
}

pub struct BoxKernel(pub BoxBlurSpec);
pub struct GaussKernel(pub GaussianSpec);
pub struct RotateKernel(pub RotationSpec);
pub struct FuseKernel;

impl BenchKernel for BoxKernel {
    fn name(&self) -> &str {
        "box"
    }
    fn input(&self, size: usize) -> Payload {
        let mut rng = rng_for(size);
        Payload::Image(ImageU8::new(size, size, 1, (0..size * size).map(|_| rng.gen()).collect()).expect("size >= 1"))
    }
    fn serial(&self, input: &Payload) -> Payload {
        Payload::Image(box_blur_oracle(expect_payload!(input, Image), self.0))
    }
    fn parallel(&self, input: &Payload, par: Parallelism) -> Payload {
        Payload::Image(box_blur_boundary_safe(expect_payload!(input, Image), self.0, par))
    }
}

impl BenchKernel for GaussKernel {
    fn name(&self) -> &str {
        "gauss"
    }
    fn input(&self, size: usize) -> Payload {
        Payload::Tensor(random_plane(size, 1))
    }
    fn serial(&self, input: &Payload) -> Payload {
        Payload::Tensor(gaussian_oracle(expect_payload!(input, Tensor), self.0))
    }
    fn parallel(&self, input: &Payload, par: Parallelism) -> Payload {
        Payload::Tensor(gaussian_filter(expect_payload!(input, Tensor), self.0, par))
    }
}

impl BenchKernel for RotateKernel {
    fn name(&self) -> &str {
        "rotate"
    }
    fn input(&self, size: usize) -> Payload {
        Payload::Tensor(random_plane(size, 1))
    }
    fn serial(&self, input: &Payload) -> Payload {
        Payload::Tensor(rotate_oracle(expect_payload!(input, Tensor), &self.0))
    }
    fn parallel(&self, input: &Payload, par: Parallelism) -> Payload {
        Payload::Tensor(rotate(expect_payload!(input, Tensor), &self.0, par))
    }
}

impl BenchKernel for FuseKernel {
    fn name(&self) -> &str {
        "fuse"
    }
    fn input(&self, size: usize) -> Payload {
        let mut rng = rng_for(size);
        let d = Dims::new(1, 3, size, size).expect("size >= 1");
        let p = Tensor4D::from_fn(Dims { c: 1, ..d }, |_, _, _, _| rng.gen());
        Payload::Fusion {
            p: TransparencyMap::new(p).expect("uniform samples lie in [0, 1)"),
            fuzzy: Tensor4D::from_fn(d, |_, _, _, _| rng.gen()),
            original: Tensor4D::from_fn(d, |_, _, _, _| rng.gen()),
        }
    }
    fn serial(&self, input: &Payload) -> Payload {
        match input {
            Payload::Fusion { p, fuzzy, original } => Payload::Tensor(fuse_oracle(p, fuzzy, original)),
            other => panic!("unexpected payload {other:?}"),
        }
    }
    fn parallel(&self, input: &Payload, par: Parallelism) -> Payload {
        match input {
            Payload::Fusion { p, fuzzy, original } => {
                Payload::Tensor(fuse(p, fuzzy, original, par).expect("generated shapes agree"))
            }
            other => panic!("unexpected payload {other:?}"),
        }
    }
}

/// Kernel by CLI name: `box`, `gauss`, `rotate` or `fuse`.
pub fn builtin_kernel(name: &str) -> Result<Box<dyn BenchKernel>> {
    Ok(match name {
        "box" => Box::new(BoxKernel(BoxBlurSpec::new(1)?)),
        "gauss" => Box::new(GaussKernel(GaussianSpec::with_sigma(2.0)?)),
        "rotate" => Box::new(RotateKernel(RotationSpec::new(7.3, InterpMode::Bilinear))),
        "fuse" => Box::new(FuseKernel),
        other => return Err(Error::InvalidParam(format!("unknown bench kernel {other:?}"))),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchCase {
    pub kernel: String,
    pub size: usize,
    pub workers: usize,
}

impl BenchCase {
    pub fn new(kernel: impl Into<String>, size: usize, workers: usize) -> Self {
        Self {
            kernel: kernel.into(),
            size,
            workers,
        }
    }

    fn label(&self) -> String {
        format!("{}@{}x{}/w{}", self.kernel, self.size, self.size, self.workers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub kernel: String,
    pub size: usize,
    pub workers: usize,
    pub median_ns: u128,
    pub serial_median_ns: u128,
    pub speedup: f64,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub cores: usize,
    pub run_date: String,
    pub parallel_feature: bool,
}

/// Published unit timings kept alongside measurements for context only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTimings {
    pub label: String,
    pub cpu_unit_ms: f64,
    pub gpu_unit_ms: f64,
    pub table_ratio: f64,
    pub claimed_speedup: String,
}

impl Default for ReferenceTimings {
    fn default() -> Self {
        let (cpu, gpu) = (688.45, 17.94);
        Self {
            label: "reference unit latency, CPU vs GPU (not reproduced)".into(),
            cpu_unit_ms: cpu,
            gpu_unit_ms: gpu,
            table_ratio: cpu / gpu,
            claimed_speedup: "more than 400x".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub records: Vec<BenchRecord>,
    pub environment: Environment,
    pub reference: ReferenceTimings,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>11} {:>7} {:>14} {:>14} {:>8}  {}",
            "kernel", "size", "workers", "median_ms", "serial_ms", "speedup", "checksum"
        );
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:<8} {:>11} {:>7} {:>14.3} {:>14.3} {:>8.2}  {}",
                r.kernel,
                format!("{0}x{0}", r.size),
                r.workers,
                r.median_ns as f64 / 1e6,
                r.serial_median_ns as f64 / 1e6,
                r.speedup,
                r.checksum
            );
        }
        let _ = writeln!(
            s,
            "cores={} parallel_feature={} repeats={}",
            self.environment.cores, self.environment.parallel_feature, self.repeats
        );
        s
    }
}

/// Median wall time of `repeats` runs after one warm-up, plus the last output.
pub fn time_median<T>(repeats: usize, mut run: impl FnMut() -> T) -> (u128, T) {
    let mut last = std::hint::black_box(run());
    let mut times: Vec<u128> = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        last = std::hint::black_box(run());
        times.push(start.elapsed().as_nanos());
    }
    times.sort_unstable();
    (times[times.len() / 2], last)
}

/// Runs `cases` using the built-in kernels.
pub fn run_bench(cases: &[BenchCase], repeats: usize) -> Result<BenchReport> {
    let mut kernels: Vec<Box<dyn BenchKernel>> = Vec::new();
    for case in cases {
        if !kernels.iter().any(|k| k.name() == case.kernel) {
            kernels.push(builtin_kernel(&case.kernel)?);
        }
    }
    let refs: Vec<&dyn BenchKernel> = kernels.iter().map(|k| k.as_ref()).collect();
    run_bench_with(&refs, cases, repeats)
}

/// Runs `cases`, looking kernels up by name in `kernels`.
pub fn run_bench_with(kernels: &[&dyn BenchKernel], cases: &[BenchCase], repeats: usize) -> Result<BenchReport> {
    if repeats < MIN_REPEATS {
        return Err(Error::InvalidParam(format!("repeats must be >= {MIN_REPEATS}, got {repeats}")));
    }
    let mut inputs: HashMap<(String, usize), Payload> = HashMap::new();
    let mut serial: HashMap<(String, usize), (u128, u64)> = HashMap::new();
    let mut records = Vec::with_capacity(cases.len());
    for case in cases {
        if case.size == 0 || case.workers == 0 {
            return Err(Error::InvalidParam(format!("bench case {} needs size and workers >= 1", case.label())));
        }
        let kernel = *kernels
            .iter()
            .find(|k| k.name() == case.kernel)
            .ok_or_else(|| Error::InvalidParam(format!("unknown bench kernel {:?}", case.kernel)))?;
        let key = (case.kernel.clone(), case.size);
        let input = inputs.entry(key.clone()).or_insert_with(|| kernel.input(case.size));
        let (serial_ns, serial_sum) = *serial.entry(key).or_insert_with(|| {
            let (ns, out) = time_median(repeats, || kernel.serial(input));
            (ns, out.checksum())
        });
        log::debug!("timing {}", case.label());
        let par = Parallelism::new(case.workers);
        let (ns, out) = time_median(repeats, || kernel.parallel(input, par));
        let sum = out.checksum();
        if sum != serial_sum {
            return Err(Error::ChecksumMismatch {
                case: case.label(),
                serial: serial_sum,
                parallel: sum,
            });
        }
        records.push(BenchRecord {
            kernel: case.kernel.clone(),
            size: case.size,
            workers: case.workers,
            median_ns: ns,
            serial_median_ns: serial_ns,
            speedup: serial_ns as f64 / ns.max(1) as f64,
            checksum: format!("{sum:016x}"),
        });
    }
    Ok(BenchReport {
        repeats,
        records,
        environment: Environment {
            cores: available_cores(),
            run_date: chrono::Utc::now().to_rfc3339(),
            parallel_feature: cfg!(feature = "parallel"),
        },
        reference: ReferenceTimings::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Broken;

    impl BenchKernel for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn input(&self, size: usize) -> Payload {
            BoxKernel(BoxBlurSpec::new(1).unwrap()).input(size)
        }
        fn serial(&self, input: &Payload) -> Payload {
            BoxKernel(BoxBlurSpec::new(1).unwrap()).serial(input)
        }
        fn parallel(&self, input: &Payload, _: Parallelism) -> Payload {
            let mut img = expect_payload!(input, Image).clone();
            img.data_mut()[0] ^= 1;
            Payload::Image(img)
        }
    }

    #[test]
    fn one_record_per_case_with_matching_checksums() {
        let cases: Vec<BenchCase> = ["box", "gauss", "rotate", "fuse"]
            .iter()
            .flat_map(|k| [1, 3].map(|w| BenchCase::new(*k, 24, w)))
            .collect();
        let report = run_bench(&cases, 5).unwrap();
        assert_eq!(report.records.len(), cases.len());
        for pair in report.records.chunks(2) {
            assert_eq!(pair[0].checksum, pair[1].checksum);
        }
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["reference"]["cpu_unit_ms"], 688.45);
        assert_eq!(json["reference"]["gpu_unit_ms"], 17.94);
        assert!(report.to_table().lines().count() > cases.len());
    }

    #[test]
    fn single_worker_checksum_equals_oracle() {
        let k = BoxKernel(BoxBlurSpec::new(1).unwrap());
        let input = k.input(33);
        assert_eq!(k.serial(&input).checksum(), k.parallel(&input, Parallelism::serial()).checksum());
    }

    #[test]
    fn mismatch_names_case() {
        let err = run_bench_with(&[&Broken], &[BenchCase::new("broken", 16, 2)], 5).unwrap_err();
        match err {
            Error::ChecksumMismatch { case, .. } => assert_eq!(case, "broken@16x16/w2"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(run_bench(&[BenchCase::new("box", 8, 1)], 4).is_err());
        assert!(run_bench(&[BenchCase::new("sobel", 8, 1)], 5).is_err());
        assert!(run_bench(&[BenchCase::new("box", 8, 0)], 5).is_err());
    }

    #[test]
    fn checksum_is_fnv1a() {
        // FNV-1a 64 of the empty input is the offset basis; of "a" is a known constant.
        let img = ImageU8::new(1, 1, 1, vec![b'a']).unwrap();
        assert_eq!(Payload::Image(img).checksum(), 0xaf63dc4c8601ec8c);
    }
}

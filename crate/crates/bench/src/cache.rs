//! On-disk cache of fitted exponential sums.
//!
//! Sums are stored in normalized form (interval `[1, R]`) keyed by the term
//! count and the interval ratio rounded up to three significant digits, and
//! rescaled to the requested interval through the exact scaling law. Rounding
//! up keeps the cached validity interval a superset of the requested one, so
//! the measured sup error remains a valid operator bound.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use longdomain_core::expsum::{fit_expsum_inv_x, ExponentialSum};

use crate::BenchError;

pub struct ExpsumCache {
    dir: Option<PathBuf>,
    mem: RefCell<HashMap<(usize, u64), ExponentialSum>>,
}

/// Round up to three significant digits.
fn ratio_key(x: f64) -> f64 {
    if x <= 1.0 {
        return 1.0;
    }
    let exp = x.log10().floor() as i32 - 2;
    let unit = 10f64.powi(exp);
    (x / unit).ceil() * unit
}

impl ExpsumCache {
    /// Cache in `dir` (created if missing); `None` keeps fits in memory only.
    pub fn new(dir: Option<PathBuf>) -> Result<Self, BenchError> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(ExpsumCache {
            dir,
            mem: RefCell::new(HashMap::new()),
        })
    }

    pub fn in_memory() -> Self {
        ExpsumCache {
            dir: None,
            mem: RefCell::new(HashMap::new()),
        }
    }

    fn path_for(&self, r: usize, key: f64) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("invx_r{r}_R{key:e}.csv")))
    }

    /// Fitted (or cached) sum for `1/x` on `[a, b]`, rescaled from the
    /// normalized fit.
    pub fn fit(&self, r: usize, a: f64, b: f64) -> Result<ExponentialSum, BenchError> {
        if !(a > 0.0 && b >= a) {
            return Err(BenchError::Parse("invalid spectral interval".into()));
        }
        let key = ratio_key(b / a);
        let mem_key = (r, key.to_bits());
        if let Some(sum) = self.mem.borrow().get(&mem_key) {
            return Ok(sum.rescale(a));
        }
        if let Some(path) = self.path_for(r, key) {
            if path.exists() {
                let sum = read_sum(&fs::read_to_string(&path)?)?;
                self.mem.borrow_mut().insert(mem_key, sum.clone());
                return Ok(sum.rescale(a));
            }
        }
        let sum = fit_expsum_inv_x(r, 1.0, key)?;
        if let Some(path) = self.path_for(r, key) {
            fs::write(&path, write_sum(&sum))?;
        }
        self.mem.borrow_mut().insert(mem_key, sum.clone());
        Ok(sum.rescale(a))
    }
}

/// Serialize a sum: a `r,a,b,eps` header block followed by the
/// `nu,a_nu,alpha_nu` coefficient rows.
pub fn write_sum(sum: &ExponentialSum) -> String {
    let (a, b) = sum.interval();
    let mut out = String::new();
    out.push_str("r,a,b,eps\n");
    out.push_str(&format!("{},{},{},{}\n", sum.r(), a, b, sum.eps()));
    out.push_str("nu,a_nu,alpha_nu\n");
    for (i, (c, al)) in sum.terms().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, c, al));
    }
    out
}

/// Parse the serialization of `write_sum`. The sup error is re-measured on
/// construction, so a cached file yields bit-identical results to a fresh
/// object with the same coefficients.
pub fn read_sum(text: &str) -> Result<ExponentialSum, BenchError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let expect = |lines: &mut dyn Iterator<Item = &str>, what: &str| -> Result<String, BenchError> {
        lines
            .next()
            .map(str::to_owned)
            .ok_or_else(|| BenchError::Parse(format!("missing {what} line")))
    };
    let header = expect(&mut lines, "header")?;
    if header.trim() != "r,a,b,eps" {
        return Err(BenchError::Parse("bad coefficient header".into()));
    }
    let meta = expect(&mut lines, "metadata")?;
    let fields: Vec<&str> = meta.split(',').collect();
    if fields.len() != 4 {
        return Err(BenchError::Parse("bad metadata row".into()));
    }
    let r: usize = fields[0].trim().parse().map_err(|_| BenchError::Parse("bad r".into()))?;
    let a: f64 = fields[1].trim().parse().map_err(|_| BenchError::Parse("bad a".into()))?;
    let b: f64 = fields[2].trim().parse().map_err(|_| BenchError::Parse("bad b".into()))?;
    let cols = expect(&mut lines, "column header")?;
    if cols.trim() != "nu,a_nu,alpha_nu" {
        return Err(BenchError::Parse("bad column header".into()));
    }
    let mut terms = Vec::with_capacity(r);
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(BenchError::Parse("bad coefficient row".into()));
        }
        let c: f64 = f[1].trim().parse().map_err(|_| BenchError::Parse("bad a_nu".into()))?;
        let al: f64 = f[2].trim().parse().map_err(|_| BenchError::Parse("bad alpha_nu".into()))?;
        terms.push((c, al));
    }
    if terms.len() != r {
        return Err(BenchError::Parse(format!(
            "expected {r} coefficient rows, found {}",
            terms.len()
        )));
    }
    Ok(ExponentialSum::from_parts(terms, a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_rounding_covers_request() {
        for x in [1.0, 1.004, 17.23, 999.4, 1040.0, 123456.0] {
            let k = ratio_key(x);
            assert!(k >= x * (1.0 - 1e-12), "{k} < {x}");
            assert!(k <= x * 1.011, "{k} too far above {x}");
        }
    }

    #[test]
    fn roundtrip_serialization_is_exact() {
        let sum = fit_expsum_inv_x(3, 1.0, 120.0).unwrap();
        let text = write_sum(&sum);
        let back = read_sum(&text).unwrap();
        assert_eq!(back.terms(), sum.terms());
        assert_eq!(back.interval(), sum.interval());
        assert_eq!(back.eps(), sum.eps());
    }

    #[test]
    fn disk_cache_reuses_fits() {
        let dir = std::env::temp_dir().join(format!("expsum-cache-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let cache = ExpsumCache::new(Some(dir.clone())).unwrap();
        let s1 = cache.fit(2, 2.0, 250.0).unwrap();
        // fresh cache object reads the file rather than refitting
        let cache2 = ExpsumCache::new(Some(dir.clone())).unwrap();
        let s2 = cache2.fit(2, 2.0, 250.0).unwrap();
        assert_eq!(s1.terms(), s2.terms());
        assert_eq!(s1.eps(), s2.eps());
        // a different lower end reuses the normalized fit through rescaling
        let s3 = cache2.fit(2, 4.0, 500.0).unwrap();
        assert_eq!(s3.r(), s2.r());
        assert!((s3.eps() - s2.eps() * 2.0 / 4.0 * 1.0).abs() <= 1e-12 * s3.eps() + 1e-300);
        let _ = fs::remove_dir_all(&dir);
    }
}

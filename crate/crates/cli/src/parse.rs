//! Argument grammar: complex literals, contours and `--config` files.

use num_complex::Complex64 as C64;
use std::path::Path;

/// Parses `a+bi`, `a-bi`, `bi`, `i`, `-i`, `a`, or `re,im`.
pub fn complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty complex number".into());
    }
    if let Some((re, im)) = t.split_once(',') {
        return Ok(C64::new(real(re)?, real(im)?));
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return Ok(C64::new(real(&t)?, 0.0));
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (real(&body[..k])?, imaginary(&body[k..])?),
        None => (0.0, imaginary(body)?),
    };
    Ok(C64::new(re, im))
}

fn real(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

fn imaginary(s: &str) -> Result<f64, String> {
    match s {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => real(s),
    }
}

/// Sample points of a `start:end:count` contour.
#[derive(Debug, Clone)]
pub struct Contour(pub Vec<C64>);

/// `start:end:count`, sampled as start + (end − start)·k/count for k < count.
pub fn contour(s: &str) -> Result<Contour, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(format!("contour must be start:end:count, got {s:?}"));
    };
    let (a, b) = (complex(a)?, complex(b)?);
    let n: usize = n.parse().map_err(|_| format!("bad sample count {n:?}"))?;
    if n == 0 {
        return Err("contour needs at least one sample".into());
    }
    Ok(Contour((0..n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect()))
}

/// `n=COMPLEX`, one Fourier coefficient of a Hill potential.
pub fn coefficient(s: &str) -> Result<(i64, C64), String> {
    let (n, v) = s.split_once('=').ok_or_else(|| format!("coefficient must be n=value, got {s:?}"))?;
    let n = n.trim().parse().map_err(|_| format!("bad mode index {n:?}"))?;
    Ok((n, complex(v)?))
}

/// Removes `--config FILE` from argv and splices its `key=value` lines in
/// right after the subcommand, so explicit flags (which come later) win.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let flags = config_flags(Path::new(&path))?;
    // argv[0], then global options, then the subcommand.
    let mut pos = 1;
    while pos < rest.len() && rest[pos].starts_with('-') {
        pos += if rest[pos] == "--threads" { 2 } else { 1 };
    }
    if pos >= rest.len() {
        return Err("--config given without a subcommand".into());
    }
    rest.splice(pos + 1..pos + 1, flags);
    Ok(rest)
}

fn config_flags(path: &Path) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        match v {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => {
                out.push(format!("--{k}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

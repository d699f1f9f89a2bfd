use crate::output::fmt_float;
use anyhow::{bail, ensure, Context, Result};
use std::io::Write;
use std::path::PathBuf;

/// Copies the rows of one or more `ertd.csv` files and appends
/// `x = log10(evals / d)`. Returns the number of data rows written.
pub fn cmd_plotdata<W: Write>(inputs: &[PathBuf], out: W) -> Result<usize> {
    ensure!(!inputs.is_empty(), "no input file");
    let mut w = csv::Writer::from_writer(out);
    let mut header: Option<csv::StringRecord> = None;
    let mut rows = 0;
    for path in inputs {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        let h = rdr.headers()?.clone();
        let col = |name: &str| {
            h.iter()
                .position(|c| c == name)
                .with_context(|| format!("{}: missing column `{name}`", path.display()))
        };
        let (d_col, e_col) = (col("d")?, col("evals")?);
        match &header {
            None => {
                let mut full = h.clone();
                full.push_field("x");
                w.write_record(&full)?;
                header = Some(h);
            }
            Some(first) if *first != h => bail!("{}: columns differ from the first input", path.display()),
            Some(_) => {}
        }
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.with_context(|| format!("{}: malformed row {}", path.display(), line + 2))?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .with_context(|| format!("{}: row {}: not a number", path.display(), line + 2))
            };
            let (d, evals) = (parse(d_col)?, parse(e_col)?);
            ensure!(d > 0.0 && evals > 0.0, "{}: row {}: d and evals must be positive", path.display(), line + 2);
            let mut out = rec.clone();
            out.push_field(&fmt_float((evals / d).log10()));
            w.write_record(&out)?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(content: &str) -> Result<String> {
        let dir = tempfile::tempdir()?;
        let p = dir.path().join("ertd.csv");
        std::fs::write(&p, content)?;
        let mut buf = Vec::new();
        cmd_plotdata(&[p], &mut buf)?;
        Ok(String::from_utf8(buf)?)
    }

    #[test]
    fn log_abscissa() {
        let s = run("config,function_group,d,evals,proportion\nM,all,3,30,0.5\nM,all,3,3,0.1\n").unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "config,function_group,d,evals,proportion,x");
        let x1: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
        let x2: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(x1, 1.0);
        assert_eq!(x2, 0.0);
    }

    #[test]
    fn malformed_rejected() {
        assert!(run("config,d,evals\nM,x,3\n").is_err());
        assert!(run("config,evals\nM,3\n").is_err());
        assert!(run("config,d,evals\nM,3,0\n").is_err());
    }
}

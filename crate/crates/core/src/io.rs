//! File formats: fields as CSV (row-major over cells, one column per
//! component, header recording N, L, n, m), radial profiles and level-set
//! tables as plain CSV.

use crate::error::FieldError;
use crate::field::{Field, Grid};
use crate::transforms::{LevelSetTable, RadialProfile};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Writes a field as CSV. The header line carries the grid shape so the file
/// is self-describing.
pub fn write_field_csv(path: &Path, field: &Field) -> Result<(), FieldError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let g = field.grid();
    writeln!(
        w,
        "# field N={} L={} n={} m={}",
        g.dim(),
        g.half_extent(),
        g.cells_per_dim(),
        field.num_components()
    )?;
    let m = field.num_components();
    let mut line = String::new();
    for cell in 0..g.cell_count() {
        line.clear();
        for i in 0..m {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:.17e}", field.component(i)[cell]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<Field, FieldError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| FieldError::Parse {
            line: 1,
            message: "empty file".into(),
        })?
        .map_err(FieldError::Io)?;
    let (grid, m) = parse_field_header(&header)?;
    let mut components = vec![Vec::with_capacity(grid.cell_count()); m];
    let mut lineno = 1usize;
    for line in lines {
        lineno += 1;
        let line = line.map_err(FieldError::Io)?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut count = 0;
        for (i, tok) in trimmed.split(',').enumerate() {
            if i >= m {
                return Err(FieldError::Parse {
                    line: lineno,
                    message: format!("expected {m} columns"),
                });
            }
            let val: f64 = tok.trim().parse().map_err(|e| FieldError::Parse {
                line: lineno,
                message: format!("bad number '{tok}': {e}"),
            })?;
            components[i].push(val);
            count = i + 1;
        }
        if count != m {
            return Err(FieldError::Parse {
                line: lineno,
                message: format!("expected {m} columns, got {count}"),
            });
        }
    }
    Field::from_components(grid, components)
}

fn parse_field_header(header: &str) -> Result<(Grid, usize), FieldError> {
    let bad = |message: String| FieldError::Parse { line: 1, message };
    if !header.starts_with("# field") {
        return Err(bad("missing '# field' header".into()));
    }
    let mut dim = None;
    let mut l = None;
    let mut n = None;
    let mut m = None;
    for tok in header.trim_start_matches("# field").split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header token '{tok}'")))?;
        match key {
            "N" => dim = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "L" => l = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "n" => n = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "m" => m = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            other => return Err(bad(format!("unknown header key '{other}'"))),
        }
    }
    let dim = dim.ok_or_else(|| bad("header missing N".into()))?;
    let l = l.ok_or_else(|| bad("header missing L".into()))?;
    let n = n.ok_or_else(|| bad("header missing n".into()))?;
    let m = m.ok_or_else(|| bad("header missing m".into()))?;
    let grid = Grid::new(dim, l, n).map_err(|e| bad(e.to_string()))?;
    Ok((grid, m))
}

/// Profile CSV: header `r,u1,...,um`, one row per shell.
pub fn write_profile_csv(path: &Path, profile: &RadialProfile) -> Result<(), FieldError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let m = profile.values.len();
    let mut header = String::from("r");
    for i in 0..m {
        header.push_str(&format!(",u{}", i + 1));
    }
    writeln!(w, "{header}")?;
    for (j, r) in profile.radii.iter().enumerate() {
        let mut line = format!("{r:.12e}");
        for comp in &profile.values {
            line.push_str(&format!(",{:.12e}", comp[j]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Level-set table CSV: header `t,volume`.
pub fn write_level_set_csv(path: &Path, table: &LevelSetTable) -> Result<(), FieldError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,volume")?;
    for (t, vol) in table.thresholds.iter().zip(&table.volumes) {
        writeln!(w, "{t:.12e},{vol:.12e}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    #[test]
    fn field_round_trip() {
        let grid = Grid::new(2, 3.0, 12).unwrap();
        let f = Field::from_fn(grid, 2, |x, out| {
            out[0] = (x[0] - 0.5 * x[1]).sin();
            out[1] = x[0] * x[1];
        });
        let dir = std::env::temp_dir().join("groundstate-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.csv");
        write_field_csv(&path, &f).unwrap();
        let back = read_field_csv(&path).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.num_components(), 2);
        for i in 0..2 {
            for (a, b) in f.component(i).iter().zip(back.component(i)) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn header_errors_are_line_anchored() {
        let dir = std::env::temp_dir().join("groundstate-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "nonsense\n1.0\n").unwrap();
        match read_field_csv(&path) {
            Err(FieldError::Parse { line: 1, .. }) => {}
            other => panic!("expected header parse error, got {other:?}"),
        }
    }
}

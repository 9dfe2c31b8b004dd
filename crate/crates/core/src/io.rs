//! CSV, legacy-VTK and raw DoF dump formats.
//!
//! Reals in CSV files use the shortest representation that parses back to
//! the same `f64`, so every file round-trips exactly.

use std::io::{BufRead, Read, Write};

use crate::cases::{ConvergenceRow, QuantityError};
use crate::field::{DgField, Staggering};
use crate::fieldops::SpdgOperators;
use crate::nssolver::{Involutions, StepDiagnostics};
use crate::SpdgError;

pub const DIAGNOSTICS_HEADER: &str =
    "step,time,dt,div_omega_linf,div_u_linf,div_psi_linf,gmres_visc_iters,gmres_stream_iters";

/// Marker for an order that is not defined (first row, round-off errors).
pub const NO_ORDER: &str = "-";

fn fmt_real(x: f64) -> String {
    format!("{x:e}")
}

fn parse_real(s: &str, what: &str) -> Result<f64, SpdgError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| SpdgError::Format(format!("{what}: '{s}' is not a number")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize, SpdgError> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| SpdgError::Format(format!("{what}: '{s}' is not a non-negative integer")))
}

pub fn diagnostics_row(d: &StepDiagnostics) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        d.step,
        fmt_real(d.time),
        fmt_real(d.dt),
        fmt_real(d.involutions.omega),
        fmt_real(d.involutions.u),
        fmt_real(d.involutions.psi),
        d.gmres_visc_iters,
        d.gmres_stream_iters
    )
}

pub fn write_diagnostics<W: Write>(mut w: W, rows: &[StepDiagnostics]) -> Result<(), SpdgError> {
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", diagnostics_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_diagnostics<R: BufRead>(r: R) -> Result<Vec<StepDiagnostics>, SpdgError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| SpdgError::Format("diagnostics: empty file".into()))??;
    if header.trim() != DIAGNOSTICS_HEADER {
        return Err(SpdgError::Format(format!("diagnostics: unexpected header '{header}'")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(SpdgError::Format(format!("diagnostics row {}: expected 8 fields", i + 1)));
        }
        out.push(StepDiagnostics {
            step: parse_usize(f[0], "step")?,
            time: parse_real(f[1], "time")?,
            dt: parse_real(f[2], "dt")?,
            involutions: Involutions {
                omega: parse_real(f[3], "div_omega_linf")?,
                u: parse_real(f[4], "div_u_linf")?,
                psi: parse_real(f[5], "div_psi_linf")?,
            },
            gmres_visc_iters: parse_usize(f[6], "gmres_visc_iters")?,
            gmres_stream_iters: parse_usize(f[7], "gmres_stream_iters")?,
        });
    }
    Ok(out)
}

fn fmt_order(o: Option<f64>) -> String {
    o.map_or_else(|| NO_ORDER.to_string(), fmt_real)
}

fn parse_order(s: &str) -> Result<Option<f64>, SpdgError> {
    if s.trim() == NO_ORDER {
        Ok(None)
    } else {
        parse_real(s, "order").map(Some)
    }
}

/// Header for a convergence table with the given quantity labels.
pub fn convergence_header(labels: &[&str]) -> String {
    let mut h = String::from("n_h,h");
    for l in labels {
        h.push_str(&format!(",{l}_l1,{l}_order_l1,{l}_linf,{l}_order_linf"));
    }
    h.push_str(",divcurl_linf,steps");
    h
}

pub fn write_convergence<W: Write>(mut w: W, rows: &[ConvergenceRow]) -> Result<(), SpdgError> {
    let labels: Vec<&str> = rows
        .first()
        .map(|r| r.quantities.iter().map(|q| q.label.as_str()).collect())
        .unwrap_or_default();
    writeln!(w, "{}", convergence_header(&labels))?;
    for r in rows {
        if r.quantities.len() != labels.len() {
            return Err(SpdgError::InvalidArgument("convergence rows disagree on their quantities".into()));
        }
        let mut line = format!("{},{}", r.n_h, fmt_real(r.h));
        for q in &r.quantities {
            line.push_str(&format!(
                ",{},{},{},{}",
                fmt_real(q.l1),
                fmt_order(q.order_l1),
                fmt_real(q.linf),
                fmt_order(q.order_linf)
            ));
        }
        line.push_str(&format!(",{},{}", fmt_real(r.divcurl), r.steps));
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_convergence<R: BufRead>(r: R) -> Result<Vec<ConvergenceRow>, SpdgError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| SpdgError::Format("convergence: empty file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 4 || cols[0] != "n_h" || cols[1] != "h" || (cols.len() - 4) % 4 != 0 {
        return Err(SpdgError::Format(format!("convergence: unexpected header '{header}'")));
    }
    let nq = (cols.len() - 4) / 4;
    let labels: Vec<String> = (0..nq)
        .map(|q| {
            let c = cols[2 + 4 * q];
            c.strip_suffix("_l1")
                .map(str::to_string)
                .ok_or_else(|| SpdgError::Format(format!("convergence: bad column '{c}'")))
        })
        .collect::<Result<_, _>>()?;
    if convergence_header(&labels.iter().map(String::as_str).collect::<Vec<_>>()) != header.trim() {
        return Err(SpdgError::Format(format!("convergence: unexpected header '{header}'")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(SpdgError::Format(format!("convergence: row has {} fields", f.len())));
        }
        let quantities = labels
            .iter()
            .enumerate()
            .map(|(q, label)| {
                let b = 2 + 4 * q;
                Ok(QuantityError {
                    label: label.clone(),
                    l1: parse_real(f[b], "l1")?,
                    order_l1: parse_order(f[b + 1])?,
                    linf: parse_real(f[b + 2], "linf")?,
                    order_linf: parse_order(f[b + 3])?,
                })
            })
            .collect::<Result<Vec<_>, SpdgError>>()?;
        out.push(ConvergenceRow {
            n_h: parse_usize(f[0], "n_h")?,
            h: parse_real(f[1], "h")?,
            quantities,
            divcurl: parse_real(f[f.len() - 2], "divcurl_linf")?,
            steps: parse_usize(f[f.len() - 1], "steps")?,
        });
    }
    Ok(out)
}

/// Writes cell means of fields sharing one staggering as legacy-VTK
/// structured points. One-component fields become `SCALARS`, three-component
/// fields `VECTORS`.
pub fn write_vtk<W: Write>(
    mut w: W,
    ops: &SpdgOperators,
    title: &str,
    fields: &[(&str, &DgField)],
) -> Result<(), SpdgError> {
    let stag = match fields.first() {
        Some((_, f)) => f.staggering(),
        None => return Err(SpdgError::InvalidArgument("write_vtk: no fields".into())),
    };
    if fields.iter().any(|(_, f)| f.staggering() != stag) {
        return Err(SpdgError::InvalidArgument("write_vtk: fields on different staggerings".into()));
    }
    let g = ops.grid();
    let n = g.counts();
    let dx = g.spacing();
    let shift = if stag == Staggering::Dual { 0.5 } else { 0.0 };
    let origin: [f64; 3] = std::array::from_fn(|d| g.lower()[d] + shift * dx[d]);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", n[0] + 1, n[1] + 1, n[2] + 1)?;
    writeln!(w, "ORIGIN {:e} {:e} {:e}", origin[0], origin[1], origin[2])?;
    writeln!(w, "SPACING {:e} {:e} {:e}", dx[0], dx[1], dx[2])?;
    writeln!(w, "CELL_DATA {}", g.n_cells())?;
    let weights: Vec<f64> = (0..ops.ndof()).map(|l| ops.basis().node_weight(l)).collect();
    for (name, f) in fields {
        let nc = f.ncomp();
        match nc {
            1 => {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
            }
            3 => writeln!(w, "VECTORS {name} double")?,
            _ => {
                return Err(SpdgError::InvalidArgument(format!(
                    "write_vtk: field '{name}' has {nc} components"
                )))
            }
        }
        for cell in 0..f.ncells() {
            let mut m = [0.0; 3];
            for (l, wl) in weights.iter().enumerate() {
                for (c, mc) in m.iter_mut().enumerate().take(nc) {
                    *mc += wl * f.get(cell, l, c);
                }
            }
            let line: Vec<String> = m[..nc].iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const RAW_MAGIC: &[u8; 4] = b"SPDG";
pub const RAW_VERSION: u8 = 1;
pub const RAW_HEADER_LEN: usize = 16;

/// Header of a raw DoF dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawHeader {
    pub degree: u8,
    pub ncomp: u8,
    pub staggering: Staggering,
    pub counts: [u16; 3],
}

/// Writes `magic, version, N, ncomp, staggering, nx, ny, nz, reserved`
/// (16 bytes) followed by the DoFs in storage order as little-endian `f64`.
pub fn write_raw<W: Write>(mut w: W, ops: &SpdgOperators, field: &DgField) -> Result<(), SpdgError> {
    let counts = ops.grid().counts();
    let mut c16 = [0u16; 3];
    for d in 0..3 {
        c16[d] = u16::try_from(counts[d])
            .map_err(|_| SpdgError::InvalidArgument("raw dump: cell count exceeds 65535".into()))?;
    }
    if field.ncells() != ops.grid().n_cells() || field.ndof() != ops.ndof() {
        return Err(SpdgError::InvalidArgument("raw dump: field does not match the operators".into()));
    }
    let mut head = Vec::with_capacity(RAW_HEADER_LEN);
    head.extend_from_slice(RAW_MAGIC);
    head.push(RAW_VERSION);
    head.push(ops.degree() as u8);
    head.push(field.ncomp() as u8);
    head.push(field.staggering().code());
    for c in c16 {
        head.extend_from_slice(&c.to_le_bytes());
    }
    head.extend_from_slice(&0u16.to_le_bytes());
    debug_assert_eq!(head.len(), RAW_HEADER_LEN);
    w.write_all(&head)?;
    let mut buf = Vec::with_capacity(field.data().len() * 8);
    for v in field.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_raw<R: Read>(mut r: R) -> Result<(RawHeader, DgField), SpdgError> {
    let mut head = [0u8; RAW_HEADER_LEN];
    r.read_exact(&mut head)?;
    if &head[0..4] != RAW_MAGIC {
        return Err(SpdgError::Format("raw dump: bad magic".into()));
    }
    if head[4] != RAW_VERSION {
        return Err(SpdgError::Format(format!("raw dump: unsupported version {}", head[4])));
    }
    let staggering = match head[7] {
        0 => Staggering::Primal,
        1 => Staggering::Dual,
        s => return Err(SpdgError::Format(format!("raw dump: bad staggering code {s}"))),
    };
    let counts = [
        u16::from_le_bytes([head[8], head[9]]),
        u16::from_le_bytes([head[10], head[11]]),
        u16::from_le_bytes([head[12], head[13]]),
    ];
    let header = RawHeader {
        degree: head[5],
        ncomp: head[6],
        staggering,
        counts,
    };
    let n1 = header.degree as usize + 1;
    let ndof = n1 * n1 * n1;
    let ncells: usize = counts.iter().map(|&c| c as usize).product();
    let len = ncells * ndof * header.ncomp as usize;
    let mut bytes = Vec::with_capacity(len * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(SpdgError::Format(format!(
            "raw dump: expected {} payload bytes, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    let field = DgField::from_data(staggering, header.ncomp as usize, ncells, ndof, data)?;
    Ok((header, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{convergence_study, LevelResult};
    use crate::grid::StaggeredGrid;

    fn ops() -> SpdgOperators {
        SpdgOperators::new(StaggeredGrid::new([0.0; 3], [1.0, 2.0, 3.0], [2, 3, 4]).unwrap(), 1).unwrap()
    }

    fn diag(step: usize) -> StepDiagnostics {
        StepDiagnostics {
            step,
            time: 0.1 * step as f64,
            dt: 1.0 / 3.0,
            involutions: Involutions {
                omega: 1.234e-15,
                u: 0.0,
                psi: f64::MIN_POSITIVE,
            },
            gmres_visc_iters: 7,
            gmres_stream_iters: 12,
        }
    }

    #[test]
    fn diagnostics_round_trip() {
        let rows: Vec<_> = (1..5).map(diag).collect();
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), DIAGNOSTICS_HEADER);
        assert_eq!(read_diagnostics(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn diagnostics_reject_bad_input() {
        assert!(read_diagnostics(&b""[..]).is_err());
        assert!(read_diagnostics(&b"step,time\n"[..]).is_err());
        let bad = format!("{DIAGNOSTICS_HEADER}\n1,2,3\n");
        assert!(read_diagnostics(bad.as_bytes()).is_err());
        let bad = format!("{DIAGNOSTICS_HEADER}\n1,x,3,4,5,6,7,8\n");
        assert!(read_diagnostics(bad.as_bytes()).is_err());
    }

    #[test]
    fn convergence_round_trip() {
        let rows = convergence_study(&[4, 8, 16], |n| {
            let h = 1.0 / n as f64;
            Ok::<_, SpdgError>(LevelResult {
                h,
                errors: vec![
                    ("u1".into(), crate::cases::ErrorNorms { l1: h * h, linf: 3.0 * h }),
                    ("psi1".into(), crate::cases::ErrorNorms { l1: 1e-16, linf: h.powi(3) }),
                ],
                divcurl: 1e-15 * n as f64,
                steps: n,
            })
        })
        .unwrap();
        let mut buf = Vec::new();
        write_convergence(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n_h,h,u1_l1,u1_order_l1,u1_linf,u1_order_linf,psi1_l1,"));
        assert!(text.lines().nth(1).unwrap().contains(",-,"));
        assert_eq!(read_convergence(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn convergence_rejects_bad_header() {
        assert!(read_convergence(&b"a,b,c\n"[..]).is_err());
        assert!(read_convergence(&b"n_h,h,x_l1,x_order_l1,x_linf,x_order_linf,divcurl_linf\n"[..]).is_err());
    }

    #[test]
    fn raw_round_trip() {
        let o = ops();
        let f = o.random_field(Staggering::Dual, 3, 9);
        let mut buf = Vec::new();
        write_raw(&mut buf, &o, &f).unwrap();
        assert_eq!(buf.len(), RAW_HEADER_LEN + f.data().len() * 8);
        assert_eq!(&buf[..4], b"SPDG");
        assert_eq!(buf[4..8], [RAW_VERSION, 1, 3, 1]);
        assert_eq!(u16::from_le_bytes([buf[12], buf[13]]), 4);
        let (h, g) = read_raw(&buf[..]).unwrap();
        assert_eq!(h.counts, [2, 3, 4]);
        assert_eq!(g, f);
        assert!(read_raw(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_raw(&bad[..]).is_err());
    }

    #[test]
    fn vtk_cell_means() {
        let o = ops();
        let f = o.interpolate(Staggering::Primal, 1, |x| [x[0] + x[1] + x[2], 0.0, 0.0]);
        let v = o.interpolate(Staggering::Primal, 3, |_| [1.0, 2.0, 3.0]);
        let mut buf = Vec::new();
        write_vtk(&mut buf, &o, "test", &[("s", &f), ("v", &v)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("DIMENSIONS 3 4 5"));
        assert!(text.contains("CELL_DATA 24"));
        let lines: Vec<&str> = text.lines().collect();
        let s0 = lines.iter().position(|l| l.starts_with("LOOKUP_TABLE")).unwrap() + 1;
        // First cell is [0, 0.5] x [0, 2/3] x [0, 3/4]; a linear field's mean is its centre value.
        let mean: f64 = lines[s0].parse().unwrap();
        assert!((mean - (0.25 + 1.0 / 3.0 + 0.375)).abs() < 1e-14);
        let v0 = lines.iter().position(|l| l.starts_with("VECTORS")).unwrap() + 1;
        let vals: Vec<f64> = lines[v0].split(' ').map(|t| t.parse().unwrap()).collect();
        for (a, b) in vals.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let d = o.zeros(Staggering::Dual, 1);
        assert!(write_vtk(Vec::new(), &o, "t", &[("s", &f), ("d", &d)]).is_err());
    }
}

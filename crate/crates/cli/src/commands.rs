use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use linregions_core::bounds::bound_report;
use linregions_core::constructions::{self, Witness};
use linregions_core::io::{network_from_json, network_to_json};
use linregions_core::linmap::{enumerate_unit_pieces, find_identified_pair};
use linregions_core::nalgebra::DVector;
use linregions_core::polygons::{polygons_to_csv, polygons_to_svg, region_polygons_2d};
use linregions_core::regions::{count_regions, enumerate_regions, oracle_count_by_grid};
use linregions_core::report::RegionReport;
use linregions_core::{verify, FeasibilityConfig, Network, NetworkStructure};

use crate::{Command, Failure, Feasibility, Format, Kind};

pub fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Bounds {
            n0,
            widths,
            maxout_rank,
            format,
        } => bounds(n0, &widths, maxout_rank, format),
        Command::Construct {
            kind,
            p,
            readout,
            n0,
            widths,
            plain,
            n,
            m,
            k,
            depth,
            seed,
            out,
            spec,
        } => {
            let args = ConstructArgs {
                p,
                readout,
                n0,
                widths,
                plain,
                n,
                m,
                k,
                depth,
                seed,
            };
            construct(kind, &args, out.as_deref(), spec.as_deref())
        }
        Command::Enumerate {
            input,
            expect,
            count_only,
            feasibility,
            format,
            out,
        } => enumerate(input.as_deref(), expect, count_only, &feasibility, format, out.as_deref()),
        Command::Oracle {
            input,
            bounds,
            resolution,
        } => oracle(input.as_deref(), &bounds, resolution),
        Command::Regions2d {
            input,
            csv,
            svg,
            view,
            feasibility,
        } => regions2d(input.as_deref(), csv.as_deref(), svg.as_deref(), view, &feasibility),
        Command::Linmap {
            input,
            layer,
            unit,
            points,
            max_pieces,
        } => linmap(&input, layer, unit, &points, max_pieces),
        Command::Identify {
            input,
            layer,
            unit,
            x1,
            x2,
            tol,
        } => identify(&input, layer, unit, &x1, &x2, tol),
        Command::VerifyAll { seed, format } => verify_all(seed, format),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn read_network(path: Option<&Path>) -> Result<Network, Failure> {
    let text = match path {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", p.display())))?,
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    Ok(network_from_json(&text)?)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::usage(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn bounds(n0: usize, widths: &[usize], rank: Option<usize>, format: Format) -> Result<(), Failure> {
    let structure = match rank {
        Some(k) => NetworkStructure::maxout(n0, widths, k)?,
        None => NetworkStructure::rectifier(n0, widths)?,
    };
    let report = bound_report(&structure);
    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Text => report.to_text(),
    };
    write_output(None, &text)
}

struct ConstructArgs {
    p: Option<usize>,
    readout: Option<f64>,
    n0: Option<usize>,
    widths: Vec<usize>,
    plain: bool,
    n: Option<usize>,
    m: Option<usize>,
    k: Option<usize>,
    depth: Option<usize>,
    seed: u64,
}

fn need(value: Option<usize>, flag: &str, kind: Kind) -> Result<usize, Failure> {
    value.ok_or_else(|| Failure::usage(format!("--{flag} is required for --kind {kind:?}")))
}

fn construct(kind: Kind, a: &ConstructArgs, out: Option<&Path>, spec: Option<&Path>) -> Result<(), Failure> {
    let witness: Option<Witness>;
    let network = match kind {
        Kind::Sawtooth => {
            let p = need(a.p, "p", kind)?;
            witness = None;
            match a.readout {
                Some(b) => constructions::build_sawtooth_readout(p, b)?,
                None => constructions::build_sawtooth_net(p)?,
            }
        }
        Kind::Folding => {
            if a.widths.is_empty() {
                return Err(Failure::usage("--widths is required for --kind folding"));
            }
            let w = constructions::build_folding_rectifier_net(
                need(a.n0, "n0", kind)?,
                &a.widths,
                !a.plain,
                a.seed,
            )?;
            let net = w.network.clone();
            witness = Some(w);
            net
        }
        Kind::Abs => {
            let w = constructions::build_abs_net();
            let net = w.network.clone();
            witness = Some(w);
            net
        }
        Kind::Parallel => {
            let w = constructions::build_maxout_parallel(
                need(a.n, "n", kind)?,
                need(a.m, "m", kind)?,
                need(a.k, "k", kind)?,
            )?;
            let net = w.network.clone();
            witness = Some(w);
            net
        }
        Kind::Cones => {
            let w = constructions::build_maxout_cones(
                need(a.n0, "n0", kind)?,
                need(a.depth, "depth", kind)?,
                need(a.k, "k", kind)?,
            )?;
            let net = w.network.clone();
            witness = Some(w);
            net
        }
        Kind::Rank2 => {
            let sim = constructions::build_rank2_maxout_as_rectifier(
                need(a.n0, "n0", kind)?,
                need(a.depth, "depth", kind)?,
            )?;
            if sim.max_difference > 1e-9 {
                return Err(Failure::expectation(format!(
                    "rectifier simulation deviates by {} from the maxout net",
                    sim.max_difference
                )));
            }
            witness = Some(sim.maxout);
            sim.rectifier
        }
        Kind::Shi | Kind::Catalan => {
            let n = need(a.n, "n", kind)?;
            let w = if matches!(kind, Kind::Shi) {
                constructions::build_shi_layer(n)?
            } else {
                constructions::build_catalan_layer(n)?
            };
            let net = w.network.clone();
            witness = Some(w);
            net
        }
    };
    write_output(out, &network_to_json(&network)?)?;
    match (spec, &witness) {
        (Some(path), Some(w)) => std::fs::write(path, to_json(&w.spec)?)?,
        (Some(_), None) => {
            return Err(Failure::usage("this kind has no witness description"));
        }
        (None, Some(w)) => eprintln!(
            "predicted regions: {}{} ({})",
            if w.spec.exact { "" } else { ">= " },
            w.spec.predicted_count,
            w.spec.provenance
        ),
        (None, None) => {}
    }
    Ok(())
}

fn feasibility_config(f: &Feasibility) -> FeasibilityConfig {
    FeasibilityConfig {
        box_halfwidth: f.box_halfwidth,
        eps_feas: f.eps,
        exact_rational: f.exact,
        region_cap: f.cap,
        ..Default::default()
    }
}

fn enumerate(
    input: Option<&Path>,
    expect: Option<usize>,
    count_only: bool,
    feasibility: &Feasibility,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let net = read_network(input)?;
    let cfg = feasibility_config(feasibility);
    let count = if count_only {
        let c = count_regions(&net, &cfg)?;
        write_output(out, &format!("{c}\n"))?;
        c
    } else {
        let rs = enumerate_regions(&net, &cfg)?;
        let text = match format {
            Format::Json => RegionReport::new(&rs).to_json()?,
            Format::Text => {
                let mut s = format!("count {}\n", rs.len());
                for r in &rs.regions {
                    s.push_str(&format!("{}  clearance {:.3e}\n", r.pattern, r.clearance));
                }
                s
            }
        };
        write_output(out, &text)?;
        rs.len()
    };
    match expect {
        Some(want) if want != count => Err(Failure::expectation(format!(
            "expected {want} regions, counted {count}"
        ))),
        _ => Ok(()),
    }
}

fn oracle(input: Option<&Path>, bounds: &[f64], resolution: usize) -> Result<(), Failure> {
    let net = read_network(input)?;
    let intervals: Vec<(f64, f64)> = if bounds.is_empty() {
        vec![(-1.0, 1.0); net.input_dim]
    } else if bounds.len() % 2 == 0 {
        bounds.chunks(2).map(|c| (c[0], c[1])).collect()
    } else {
        return Err(Failure::usage("--bounds takes lo,hi pairs"));
    };
    let count = oracle_count_by_grid(&net, &intervals, resolution)?;
    write_output(None, &format!("{count}\n"))
}

fn regions2d(
    input: Option<&Path>,
    csv: Option<&Path>,
    svg: Option<&Path>,
    view: Option<f64>,
    feasibility: &Feasibility,
) -> Result<(), Failure> {
    let net = read_network(input)?;
    if net.input_dim != 2 {
        return Err(Failure::usage(format!(
            "regions2d needs a planar network, input dimension is {}",
            net.input_dim
        )));
    }
    let rs = enumerate_regions(&net, &feasibility_config(feasibility))?;
    let export = region_polygons_2d(&rs, view)?;
    for w in &export.warnings {
        eprintln!("warning: {w}");
    }
    let csv_text = polygons_to_csv(&export.polygons);
    match csv {
        Some(p) => std::fs::write(p, csv_text)?,
        None if svg.is_none() => write_output(None, &csv_text)?,
        None => {}
    }
    if let Some(p) = svg {
        std::fs::write(p, polygons_to_svg(&export.polygons))?;
    }
    Ok(())
}

fn read_points(path: &PathBuf, dim: usize) -> Result<Vec<DVector<f64>>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let values: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match values {
            Ok(v) => v,
            // a non-numeric first row is a header
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Failure::usage(format!("{} row {}: {e}", path.display(), i + 1)))
            }
        };
        if values.len() != dim {
            return Err(Failure::usage(format!(
                "{} row {}: expected {dim} coordinates, found {}",
                path.display(),
                i + 1,
                values.len()
            )));
        }
        points.push(DVector::from_vec(values));
    }
    Ok(points)
}

fn zero_based(index: usize, what: &str) -> Result<usize, Failure> {
    index
        .checked_sub(1)
        .ok_or_else(|| Failure::usage(format!("--{what} is 1-based")))
}

fn linmap(
    input: &Path,
    layer: usize,
    unit: usize,
    points: &PathBuf,
    max_pieces: Option<usize>,
) -> Result<(), Failure> {
    let net = read_network(Some(input))?;
    let samples = read_points(points, net.input_dim)?;
    if samples.is_empty() {
        return Err(Failure::usage("points file has no points"));
    }
    let mut pieces = enumerate_unit_pieces(
        &net,
        zero_based(layer, "layer")?,
        zero_based(unit, "unit")?,
        &samples,
    )?;
    if let Some(cap) = max_pieces {
        pieces.truncate(cap);
    }
    write_output(None, &to_json(&pieces)?)
}

fn identify(input: &Path, layer: usize, unit: usize, x1: &[f64], x2: &[f64], tol: f64) -> Result<(), Failure> {
    let net = read_network(Some(input))?;
    for (name, x) in [("x1", x1), ("x2", x2)] {
        if x.len() != net.input_dim {
            return Err(Failure::usage(format!(
                "--{name} needs {} coordinates, got {}",
                net.input_dim,
                x.len()
            )));
        }
    }
    let pair = find_identified_pair(
        &net,
        zero_based(layer, "layer")?,
        zero_based(unit, "unit")?,
        &DVector::from_row_slice(x1),
        &DVector::from_row_slice(x2),
        tol,
    )?;
    write_output(None, &to_json(&pair)?)
}

fn verify_all(seed: u64, format: Format) -> Result<(), Failure> {
    // Already inside the --workers pool when one was requested.
    let report = verify::run_all(seed, None)?;
    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Text => report.to_text(),
    };
    write_output(None, &text)?;
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id.to_string())
            .collect();
        Err(Failure::expectation(format!("failed criteria: {}", failed.join(", "))))
    }
}

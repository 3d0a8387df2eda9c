//! The model workflow commands: fit a model from a CSV, evaluate a saved
//! model on new rows, and report its sensitivity indices.

use std::io::Write;
use std::path::{Path, PathBuf};

use anova_mixt::data::{load_csv, MinMaxScale, Table};
use anova_mixt::index::superposition_family;
use anova_mixt::model::{self, mse};
use anova_mixt::{
    BasisVector, Error, GsiTable, LsqrOptions, MixedModel, NodeSet, Result, SubsetFamily,
};

use crate::config::RunConfig;

/// Names the offending file in I/O and parse errors, which otherwise carry
/// only the OS message or a line number.
pub fn with_path<T>(r: Result<T>, path: &Path) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        Error::Parse { line, msg } => {
            Error::Parse { line, msg: format!("{}: {msg}", path.display()) }
        }
        other => other,
    })
}

/// Feature rows plus the optional target column pulled out of a table.
#[derive(Debug)]
struct Frame {
    features: Vec<Vec<f64>>,
    targets: Option<Vec<f64>>,
}

/// Separates the target column: an explicit `--target` name wins; otherwise
/// a table with `dim + 1` columns treats the last one as the target, and a
/// table with exactly `dim` columns has none.
fn split_target(table: &Table, dim: usize, target: Option<&str>) -> Result<Frame> {
    let cols = table.num_cols();
    let target_idx = match target {
        Some(name) => Some(
            table
                .headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "target column `{name}` not found (columns: {})",
                        table.headers.join(", ")
                    ))
                })?,
        ),
        None if cols == dim + 1 => Some(cols - 1),
        None if cols == dim => None,
        None => {
            return Err(Error::Shape(format!(
                "table has {cols} columns but the basis has {dim} dimensions; \
                 expected {dim} feature columns plus at most one target \
                 (name one with --target)"
            )))
        }
    };
    if let Some(t) = target_idx {
        if cols != dim + 1 {
            return Err(Error::Shape(format!(
                "table has {cols} columns: expected {dim} features plus target \
                 `{}`",
                table.headers[t]
            )));
        }
    }
    let features = table
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| Some(*j) != target_idx)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect();
    let targets = target_idx.map(|t| table.column(t));
    Ok(Frame { features, targets })
}

fn nodes_from_rows(basis: &BasisVector, rows: &[Vec<f64>]) -> Result<NodeSet> {
    let mut coords = Vec::with_capacity(rows.len() * basis.dim());
    for r in rows {
        coords.extend_from_slice(r);
    }
    NodeSet::new(basis, coords)
}

/// The family either comes from a `--family` file (the `u=… N=…` line format
/// of model files) or is a superposition family built from `--n1`/`--n2`.
fn resolve_family(cfg: &RunConfig, dim: usize) -> Result<SubsetFamily> {
    if let Some(path) = &cfg.family {
        let family: SubsetFamily =
            with_path(std::fs::read_to_string(path).map_err(Into::into).and_then(|s| s.parse()), path)?;
        if family.dim() != dim {
            return Err(Error::Shape(format!(
                "family file is {}-dimensional, basis is {dim}-dimensional",
                family.dim()
            )));
        }
        return Ok(family);
    }
    let ds = cfg.superposition.unwrap_or(2).min(dim);
    let n1 = *RunConfig::require(&cfg.n1, "n1")?;
    let mut ns = vec![n1];
    if ds >= 2 {
        ns.push(*RunConfig::require(&cfg.n2, "n2")?);
    }
    if ds > 2 {
        return Err(Error::InvalidArgument(
            "superposition orders above 2 need an explicit --family file".into(),
        ));
    }
    superposition_family(dim, ds, &ns)
}

fn sidecar_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_os_string();
    s.push(".scale");
    PathBuf::from(s)
}

fn save_scale(path: &Path, scale: &MinMaxScale) -> Result<()> {
    let mut text = String::from("column,min,max\n");
    for (j, (lo, hi)) in scale.bounds().iter().enumerate() {
        text.push_str(&format!("{},{lo},{hi}\n", j + 1));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn load_scale(path: &Path) -> Result<MinMaxScale> {
    let table = with_path(load_csv(path), path)?;
    let bounds: Vec<(f64, f64)> = table.rows.iter().map(|r| (r[1], r[2])).collect();
    MinMaxScale::from_bounds(&bounds)
}

/// Fits a model on every row of the data CSV and writes the model file
/// (plus a `.scale` sidecar when `--normalize` rescaled the features).
pub fn fit(cfg: &RunConfig) -> Result<()> {
    let basis: BasisVector = RunConfig::require(&cfg.basis, "basis")?.parse()?;
    let data_path = RunConfig::require(&cfg.data, "data")?;
    let table = with_path(load_csv(data_path), data_path)?;
    let frame = split_target(&table, basis.dim(), cfg.target.as_deref())?;
    let targets = frame.targets.ok_or_else(|| {
        Error::InvalidArgument("fitting needs a target column (see --target)".into())
    })?;
    let family = resolve_family(cfg, basis.dim())?;

    let out = cfg
        .model
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("model.txt"));
    let scale = if cfg.normalize.unwrap_or(false) {
        Some(MinMaxScale::fit(&frame.features)?)
    } else {
        None
    };
    let rows = match &scale {
        Some(s) => s.transform(&frame.features),
        None => frame.features,
    };
    let nodes = nodes_from_rows(&basis, &rows)?;
    let model = model::fit(&basis, &family, &nodes, &targets, LsqrOptions::default())?;
    let train_mse = mse(&targets, &model.predict(&nodes)?)?;

    model.save(&out)?;
    if let Some(s) = &scale {
        save_scale(&sidecar_path(&out), s)?;
    }
    println!("fit: {} rows, {} dimensions", nodes.len(), basis.dim());
    println!(
        "fit: {} subsets, {} coefficients",
        model.family().blocks().len(),
        model.coefficients().values().len()
    );
    println!(
        "fit: {} iterations, stop = {}, residual = {:e}",
        model.iterations(),
        model.stop(),
        model.residual_norm()
    );
    println!("fit: training mse = {:e}", train_mse);
    println!("fit: model written to {}", out.display());
    if scale.is_some() {
        println!("fit: feature scaling written to {}", sidecar_path(&out).display());
    }
    Ok(())
}

/// Loads features, applying the model's `.scale` sidecar when present.
fn load_features(model_path: &Path, model: &MixedModel, cfg: &RunConfig) -> Result<Frame> {
    let data_path = RunConfig::require(&cfg.data, "data")?;
    let table = with_path(load_csv(data_path), data_path)?;
    let mut frame = split_target(&table, model.basis().dim(), cfg.target.as_deref())?;
    let sidecar = sidecar_path(model_path);
    if sidecar.exists() {
        let scale = load_scale(&sidecar)?;
        frame.features = scale.transform(&frame.features);
        eprintln!("note: applied feature scaling from {}", sidecar.display());
    }
    Ok(frame)
}

/// Writes per-row predictions as CSV; with targets present the squared
/// error column and the overall mse are reported as in the fit summary.
pub fn predict(cfg: &RunConfig) -> Result<()> {
    let model_path = RunConfig::require(&cfg.model, "model")?;
    let model = with_path(MixedModel::load(model_path), model_path)?;
    let frame = load_features(model_path, &model, cfg)?;
    let nodes = nodes_from_rows(model.basis(), &frame.features)?;
    let pred = model.predict(&nodes)?;

    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("predictions.csv"));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&out)?);
    match &frame.targets {
        Some(t) => {
            writeln!(w, "row,prediction,target,squared_error")?;
            for (i, (p, y)) in pred.iter().zip(t).enumerate() {
                writeln!(w, "{},{p},{y},{}", i + 1, (p - y) * (p - y))?;
            }
        }
        None => {
            writeln!(w, "row,prediction")?;
            for (i, p) in pred.iter().enumerate() {
                writeln!(w, "{},{p}", i + 1)?;
            }
        }
    }
    w.flush()?;
    println!("predict: {} rows written to {}", pred.len(), out.display());
    if let Some(t) = &frame.targets {
        println!("predict: mse = {:e}", mse(t, &pred)?);
    }
    Ok(())
}

fn format_subset(u: &[usize]) -> String {
    u.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join("+")
}

fn gsi_csv(table: &GsiTable, theta: f64) -> String {
    let mut text = String::from("subset,gsi,above_theta\n");
    for (u, rho) in table.sorted_descending() {
        text.push_str(&format!("{},{rho},{}\n", format_subset(&u), rho > theta));
    }
    text
}

/// Prints (or writes) the model's sensitivity indices, largest first, with
/// a column marking terms above the θ cutoff.
pub fn gsi(cfg: &RunConfig) -> Result<()> {
    let model_path = RunConfig::require(&cfg.model, "model")?;
    let model = with_path(MixedModel::load(model_path), model_path)?;
    let table = model.gsi()?;
    let theta = cfg.theta.unwrap_or(1e-2);
    let csv = gsi_csv(&table, theta);
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            println!("gsi: {} terms written to {}", table.entries().len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(headers: &[&str], rows: Vec<Vec<f64>>) -> Table {
        Table { headers: headers.iter().map(|s| s.to_string()).collect(), rows }
    }

    #[test]
    fn target_resolution_rules() {
        let t = table(&["a", "b", "y"], vec![vec![1.0, 2.0, 3.0]]);
        let f = split_target(&t, 2, None).unwrap();
        assert_eq!(f.features, vec![vec![1.0, 2.0]]);
        assert_eq!(f.targets, Some(vec![3.0]));

        // explicit name pulls a middle column
        let f = split_target(&t, 2, Some("b")).unwrap();
        assert_eq!(f.features, vec![vec![1.0, 3.0]]);
        assert_eq!(f.targets, Some(vec![2.0]));

        // exact width means no target
        let f = split_target(&t, 3, None).unwrap();
        assert!(f.targets.is_none());

        assert!(split_target(&t, 4, None).is_err());
        let err = split_target(&t, 2, Some("z")).unwrap_err().to_string();
        assert!(err.contains("`z`"), "{err}");
    }

    #[test]
    fn subsets_print_one_based() {
        assert_eq!(format_subset(&[0, 2]), "1+3");
        assert_eq!(format_subset(&[]), "");
    }
}

//! Result files: series CSV, density-map CSVs, JSON summary and optional SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::{DensityMap, RunOutput};

pub const SERIES_HEADER: [&str; 7] = [
    "time_us",
    "t_prime",
    "observable_name",
    "site",
    "mean",
    "sem",
    "n_shots",
];

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, Default)]
pub struct OutputFiles {
    pub series: PathBuf,
    pub summary: PathBuf,
    pub density: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// All series in long format.
pub fn series_csv(out: &RunOutput) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SERIES_HEADER)?;
    for s in &out.series {
        let site = s
            .site
            .map_or_else(|| "total".to_string(), |i| i.to_string());
        for k in 0..s.len() {
            w.write_record([
                s.times_us[k].to_string(),
                s.t_prime[k].to_string(),
                s.name.clone(),
                site.clone(),
                s.mean[k].to_string(),
                s.sem[k].to_string(),
                s.n_shots.to_string(),
            ])?;
        }
    }
    Ok(
        String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is UTF-8"),
    )
}

/// One row per time, one column per site.
pub fn density_csv(map: &DensityMap) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let n = map.values.first().map_or(0, Vec::len);
    let mut header = vec!["time_us".to_string(), "t_prime".to_string()];
    header.extend((0..n).map(|i| format!("site_{i}")));
    w.write_record(&header)?;
    for (k, row) in map.values.iter().enumerate() {
        let mut rec = vec![map.times_us[k].to_string(), map.t_prime[k].to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    Ok(
        String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is UTF-8"),
    )
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLOURS: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

/// Line plot of every array-level series.
pub fn series_svg(out: &RunOutput) -> String {
    let lines: Vec<_> = out
        .series
        .iter()
        .filter(|s| s.site.is_none() && !s.is_empty())
        .collect();
    let finite = |v: &&f64| v.is_finite();
    let xs = lines.iter().flat_map(|s| s.times_us.iter()).filter(finite);
    let ys = lines.iter().flat_map(|s| s.mean.iter()).filter(finite);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0).max(1e-12) * (H - 2.0 * PAD);

    let mut svg =
        format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n");
    let _ = writeln!(
        svg,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">time (μs)</text>",
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"5\" y=\"{}\" font-size=\"10\">{y1:.3}</text>",
        PAD
    );
    let _ = writeln!(
        svg,
        "<text x=\"5\" y=\"{}\" font-size=\"10\">{y0:.3}</text>",
        H - PAD
    );
    for (i, s) in lines.iter().enumerate() {
        let pts: Vec<String> = s
            .times_us
            .iter()
            .zip(&s.mean)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let colour = COLOURS[i % COLOURS.len()];
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{colour}\" points=\"{}\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"{colour}\">{}</text>",
            PAD + 5.0,
            PAD + 12.0 * (i + 1) as f64,
            s.name
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heat map of a density map, time left to right and sites top to bottom.
pub fn density_svg(map: &DensityMap) -> String {
    let n_t = map.values.len().max(1);
    let n_s = map.values.first().map_or(1, |r| r.len().max(1));
    let cw = (W - 2.0 * PAD) / n_t as f64;
    let ch = (H - 2.0 * PAD) / n_s as f64;
    let mut svg =
        format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n");
    for (k, row) in map.values.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            // -1 blue, +1 red
            let u = ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0).round() as u8;
            let _ = writeln!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({u},0,{})\"/>",
                PAD + k as f64 * cw,
                PAD + i as f64 * ch,
                cw,
                ch,
                255 - u
            );
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"{PAD}\" y=\"{}\" font-size=\"12\">{}</text>",
        PAD - 10.0,
        map.label
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes every result file of a run into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path, svg: bool) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let name = out.scenario.name();
    let mut files = OutputFiles {
        series: dir.join(format!("{name}_series.csv")),
        ..Default::default()
    };
    fs::write(&files.series, series_csv(out)?)?;
    files.summary = dir.join(format!("{name}_summary.json"));
    fs::write(
        &files.summary,
        serde_json::to_string_pretty(&out.summary)? + "\n",
    )?;
    for map in &out.maps {
        let stem = format!("{name}_density_{}", file_safe(&map.label));
        let path = dir.join(format!("{stem}.csv"));
        fs::write(&path, density_csv(map)?)?;
        files.density.push(path);
        if svg {
            let path = dir.join(format!("{stem}.svg"));
            fs::write(&path, density_svg(map))?;
            files.svg.push(path);
        }
    }
    if svg {
        let path = dir.join(format!("{name}_series.svg"));
        fs::write(&path, series_svg(out))?;
        files.svg.push(path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observe::ObservableSeries;
    use crate::scenarios::ScenarioId;

    #[test]
    fn names_with_commas_are_quoted() {
        let mut out = RunOutput::new(ScenarioId::Dw1d);
        out.series.push(
            ObservableSeries::exact(
                "n_flip[delta=1,driven]",
                None,
                vec![0.0],
                vec![0.0],
                vec![2.0],
            )
            .unwrap(),
        );
        let csv = series_csv(&out).unwrap();
        assert_eq!(csv, "time_us,t_prime,observable_name,site,mean,sem,n_shots\n0,0,\"n_flip[delta=1,driven]\",total,2,0,0\n");
    }

    #[test]
    fn file_names_are_sanitised() {
        assert_eq!(
            file_safe("sigma_z[delta=0.5,rabi_x4]"),
            "sigma_z_delta_0.5_rabi_x4_"
        );
    }
}

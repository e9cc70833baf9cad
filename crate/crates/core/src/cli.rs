//! `detkit` command-line interface.
//!
//! Exit codes: 0 success, 2 data error, 64 usage error, 65 semantic flag error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::anchors::{kmeans_anchors, split_scales, AnchorError, Distance, KMeansConfig};
use crate::geometry::nms;
use crate::head::{GridSpec, TensorCoord};
use crate::io::{
    emit_plot_data, emit_results, load_dataset, load_dimension_samples, load_results, parse_speed_table,
    validate_results, IoError, TableColumn,
};
use crate::metrics::{demo_map_pathology, evaluate, Detection, DetectionResultSet, EvalConfig, MetricReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_SEMANTIC: i32 = 65;

#[derive(Debug, Parser)]
#[command(name = "detkit", version, about = "Detector box math, anchor clustering, and detection metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a results file against a ground-truth dataset.
    Eval(EvalArgs),
    /// Cluster box dimensions into anchor priors grouped by scale.
    Anchors(AnchorsArgs),
    /// Prediction tensor size, or the flat offset of one element.
    Layout(LayoutArgs),
    /// Per-class non-maximum suppression over a results file.
    Nms(NmsArgs),
    /// Speed/accuracy table to plot-ready TSV.
    Plotdata(PlotArgs),
    /// Built-in demonstrations.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricChoice {
    Voc50,
    Coco,
    Global,
    PerImage,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    dets: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    metric: MetricChoice,
    /// IOU threshold for voc50, global, and per-image AP.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, value_enum, default_value = "tsv")]
    format: ReportFormat,
    /// Evaluation worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistanceChoice {
    Iou,
    Euclidean,
}

#[derive(Debug, Args)]
struct AnchorsArgs {
    #[arg(long)]
    boxes: PathBuf,
    #[arg(long, default_value_t = 9)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    scales: usize,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "iou")]
    distance: DistanceChoice,
}

#[derive(Debug, Args)]
struct LayoutArgs {
    #[arg(long)]
    grid: usize,
    #[arg(long)]
    anchors: usize,
    #[arg(long)]
    classes: usize,
    /// `row,col,anchor,channel`
    #[arg(long, value_parser = parse_coord)]
    at: Option<TensorCoord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NmsFormat {
    Json,
}

#[derive(Debug, Args)]
struct NmsArgs {
    #[arg(long)]
    dets: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 0.45)]
    iou: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: NmsFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ColumnChoice {
    #[value(name = "time_ms")]
    TimeMs,
    Metric,
}

impl From<ColumnChoice> for TableColumn {
    fn from(c: ColumnChoice) -> Self {
        match c {
            ColumnChoice::TimeMs => TableColumn::TimeMs,
            ColumnChoice::Metric => TableColumn::Metric,
        }
    }
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, value_enum, default_value = "time_ms")]
    x: ColumnChoice,
    #[arg(long, value_enum, default_value = "metric")]
    y: ColumnChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DemoName {
    MapPathology,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(value_enum)]
    name: DemoName,
}

fn parse_coord(s: &str) -> Result<TensorCoord, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("expected row,col,anchor,channel: {e}"))?;
    let [row, col, anchor, channel] = parts.as_slice() else {
        return Err(format!("expected 4 comma-separated integers, got {}", parts.len()));
    };
    Ok(TensorCoord {
        row: *row,
        col: *col,
        anchor: *anchor,
        channel: *channel,
    })
}

/// A command failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn semantic(message: impl ToString) -> Self {
        Self {
            code: EXIT_SEMANTIC,
            message: message.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Self {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

fn check_iou(iou: f64) -> Result<(), Failure> {
    if (0.0..=1.0).contains(&iou) {
        Ok(())
    } else {
        Err(Failure::semantic(format!("--iou {iou} outside [0, 1]")))
    }
}

fn fmt_tsv(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn json_value(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |v| json!(v))
}

fn selected_fields(report: &MetricReport, metric: MetricChoice) -> Vec<(&'static str, Option<f64>)> {
    let coco = [
        ("AP", report.ap),
        ("AP50", report.ap50),
        ("AP75", report.ap75),
        ("AP_S", report.ap_small),
        ("AP_M", report.ap_medium),
        ("AP_L", report.ap_large),
    ];
    match metric {
        MetricChoice::Voc50 => vec![("voc50", report.voc50)],
        MetricChoice::Coco => coco.to_vec(),
        MetricChoice::Global => vec![("global", report.global_ap)],
        MetricChoice::PerImage => vec![("per_image", report.per_image_ap)],
        MetricChoice::All => {
            let mut all = vec![("voc50", report.voc50)];
            all.extend(coco);
            all.push(("global", report.global_ap));
            all.push(("per_image", report.per_image_ap));
            all
        }
    }
}

fn render_report(report: &MetricReport, metric: MetricChoice, format: ReportFormat) -> String {
    let fields = selected_fields(report, metric);
    match format {
        ReportFormat::Tsv => {
            let header: Vec<&str> = fields.iter().map(|f| f.0).collect();
            let values: Vec<String> = fields.iter().map(|f| fmt_tsv(f.1)).collect();
            format!("{}\n{}\n", header.join("\t"), values.join("\t"))
        }
        ReportFormat::Json => {
            let mut obj = Map::new();
            obj.insert("iou_threshold".into(), json!(report.iou_threshold));
            for (name, v) in fields {
                obj.insert(name.into(), json_value(v));
            }
            if matches!(metric, MetricChoice::Voc50 | MetricChoice::All) {
                let per_class: Vec<Value> = report
                    .per_class
                    .iter()
                    .map(|c| json!({"class_id": c.class_id, "ap": json_value(c.ap)}))
                    .collect();
                obj.insert("per_class".into(), Value::Array(per_class));
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<String, Failure> {
    check_iou(args.iou)?;
    if args.jobs == 0 {
        return Err(Failure::semantic("--jobs must be positive"));
    }
    let gts = load_dataset(&args.gt)?;
    let dets = load_results(&args.dets)?;
    validate_results(&dets, &gts)?;
    let config = EvalConfig {
        iou_threshold: args.iou,
        jobs: args.jobs,
    };
    let report = evaluate(&dets, &gts, &config).map_err(|e| Failure {
        code: EXIT_DATA,
        message: e.to_string(),
    })?;
    Ok(render_report(&report, args.metric, args.format))
}

fn cmd_anchors(args: &AnchorsArgs) -> Result<String, Failure> {
    if args.scales == 0 || !args.k.is_multiple_of(args.scales) {
        return Err(Failure::semantic(AnchorError::NotDivisible {
            count: args.k,
            scales: args.scales,
        }));
    }
    let samples = load_dimension_samples(&args.boxes)?;
    let config = KMeansConfig {
        k: args.k,
        max_iters: args.iters,
        seed: args.seed,
        distance: match args.distance {
            DistanceChoice::Iou => Distance::Iou,
            DistanceChoice::Euclidean => Distance::Euclidean,
        },
    };
    let result = kmeans_anchors(&samples, &config).map_err(|e| match e {
        AnchorError::Empty => Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        },
        other => Failure::semantic(other),
    })?;
    let groups = split_scales(&result.centroids, args.scales).map_err(Failure::semantic)?;
    let blocks: Vec<String> = groups
        .iter()
        .map(|g| g.iter().map(|p| format!("{} {}\n", p.width, p.height)).collect())
        .collect();
    Ok(blocks.join("\n"))
}

fn cmd_layout(args: &LayoutArgs) -> Result<String, Failure> {
    let spec = GridSpec::new(args.grid, args.anchors, args.classes).map_err(Failure::semantic)?;
    match args.at {
        Some(at) => {
            let offset = spec.index(at).map_err(Failure::semantic)?;
            Ok(format!("{offset}\n"))
        }
        None => Ok(format!("depth\t{}\ntotal\t{}\n", spec.depth(), spec.len())),
    }
}

fn cmd_nms(args: &NmsArgs) -> Result<String, Failure> {
    check_iou(args.iou)?;
    let gts = load_dataset(&args.gt)?;
    let dets = load_results(&args.dets)?;
    validate_results(&dets, &gts)?;
    let mut kept = DetectionResultSet::default();
    for image in gts.images() {
        let boxes: Vec<_> = dets
            .detections()
            .iter()
            .filter(|d| d.image_id == image.id)
            .map(|d| d.det)
            .collect();
        for det in nms(&boxes, args.iou) {
            kept.push(Detection {
                image_id: image.id,
                det,
            });
        }
    }
    match args.format {
        NmsFormat::Json => Ok(emit_results(&kept)),
    }
}

fn cmd_plotdata(args: &PlotArgs) -> Result<String, Failure> {
    let text = std::fs::read_to_string(&args.table).map_err(|source| IoError::Read {
        path: args.table.display().to_string(),
        source,
    })?;
    let table = parse_speed_table(&text)?;
    Ok(emit_plot_data(&table, args.x.into(), args.y.into()))
}

fn cmd_demo(args: &DemoArgs) -> Result<String, Failure> {
    match args.name {
        DemoName::MapPathology => {
            let demo = demo_map_pathology();
            let (a, b) = (&demo.detector_a, &demo.detector_b);
            let mut out = String::from(
                "# per-class mAP only sees each class's own ranking, so both detectors score 1.0; \
                 pooling classes or images exposes detector B's higher-ranked false positives\n",
            );
            out.push_str("metric\tdetector_a\tdetector_b\n");
            for (name, va, vb) in [
                ("voc50", a.voc50, b.voc50),
                ("global", a.global_ap, b.global_ap),
                ("per_image", a.per_image_ap, b.per_image_ap),
            ] {
                let _ = writeln!(out, "{name}\t{}\t{}", fmt_tsv(va), fmt_tsv(vb));
            }
            Ok(out)
        }
    }
}

/// Runs the CLI with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Anchors(a) => cmd_anchors(a),
        Command::Layout(a) => cmd_layout(a),
        Command::Nms(a) => cmd_nms(a),
        Command::Plotdata(a) => cmd_plotdata(a),
        Command::Demo(a) => cmd_demo(a),
    };
    match result {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(f) => {
            let _ = writeln!(err, "detkit: {}", f.message);
            f.code
        }
    }
}

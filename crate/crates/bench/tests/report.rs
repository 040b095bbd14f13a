use spider_bench::report::{heatmap_svg, line_chart_svg};
use spider_bench::ExperimentReport;
use spider_core::data::{fit_normalizer, synthesize_traffic, SyntheticConfig};
use spider_core::{Bucket, BucketConfig, GridGeometry, Result, SelectionMatrix, StateWindow};
use spider_policy::{evaluate_selector, Selector};
use spider_recon::KnnS;

struct FirstCells(usize);

impl Selector for FirstCells {
    fn select(&self, w: &StateWindow, _: [f64; 3]) -> Result<SelectionMatrix> {
        SelectionMatrix::from_indices(w.t(), w.geometry(), &(0..self.0).collect::<Vec<_>>())
    }
}

fn report() -> ExperimentReport {
    let s = synthesize_traffic(&SyntheticConfig { geometry: GridGeometry::new(6, 6).unwrap(), days: 2, delta_minutes: 120, ..Default::default() }).unwrap();
    let s = s.normalized(&fit_normalizer(&s).unwrap()).unwrap();
    let b = BucketConfig::default();
    let evals: Vec<_> = [4, 8, 12].iter().map(|&n| evaluate_selector(&FirstCells(n), &s, &KnnS::default(), 1, &b).unwrap()).collect();
    ExperimentReport::from_evaluations(&[("random", &evals[0]), ("historical", &evals[1]), ("spider", &evals[2])])
}

#[test]
fn report_covers_every_bucket_and_strategy() {
    let r = report();
    assert_eq!(r.rows.len(), 6 * 3);
    for s in ["random", "historical", "spider"] {
        for b in Bucket::ALL {
            assert!(r.row(s, b).is_some(), "{s} {b:?}");
        }
    }
    assert_eq!(r.row("historical", Bucket::Overall).unwrap().mean_count, Some(8.0));
    // no holidays configured
    assert_eq!(r.row("spider", Bucket::Holiday).unwrap().mean_nmae, None);
    assert!(r.rows.iter().filter_map(|x| x.mean_nmae).all(|v| v >= 0.0));
}

#[test]
fn csv_has_two_metrics_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let r = report();
    r.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "strategy,bucket,count,nmae");
    assert_eq!(lines.count(), 18);
    let back = ExperimentReport::read_csv(&path).unwrap();
    assert_eq!(back.rows.len(), 18);
    assert_eq!(back.row("random", Bucket::Overall).unwrap().mean_count, Some(4.0));
    assert!(r.to_markdown().contains("spider"));
}

#[test]
fn figures_are_svg() {
    let svg = line_chart_svg("t", "x", "y", &[("a", vec![(0.0, 1.0), (1.0, 2.0)])]);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let h = heatmap_svg("h", 2, 2, &[0.0, 0.5, 1.0, 0.25]);
    // background plus one per cell
    assert_eq!(h.matches("<rect").count(), 1 + 4);
}

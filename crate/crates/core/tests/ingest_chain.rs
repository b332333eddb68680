use std::fmt::Write as _;

use spillnet::ingest::{
    apply_calendar, filter_universe, impute_and_log, read_calendar, read_meta, read_ohlc, variance_panel,
    FilterRules, OhlcSchema,
};

const META: &str = "\
ticker,name,region,state_owned,parent_ticker,share_class
600001,Alpha Steel,north,true,,A
900001,Alpha Steel B,north,true,,B
600002,Beta Bank,east,false,,A
01002,Beta Bank,east,false,,H
600003,Gamma Power,south,true,600002,A
";

fn bar(t: usize, k: usize) -> (f64, f64, f64, f64) {
    let base = 10.0 + k as f64 + 0.1 * t as f64;
    let open = base;
    let close = base * (1.0 + 0.01 * ((t + k) % 3) as f64 - 0.01);
    let high = open.max(close) * 1.02;
    let low = open.min(close) * 0.97;
    (open, high, low, close)
}

fn ohlc_csv(days: usize, skip: &[(usize, usize)]) -> String {
    let tickers = ["600001", "900001", "600002", "01002", "600003"];
    let volumes = [500u64, 100, 800, 300, 200];
    let mut s = String::from("date,ticker,open,high,low,close,volume\n");
    for t in 0..days {
        for (k, tk) in tickers.iter().enumerate() {
            if skip.contains(&(t, k)) {
                continue;
            }
            let (o, h, l, c) = bar(t, k);
            let _ = writeln!(s, "2021-03-{:02},{tk},{o},{h},{l},{c},{}", t + 1, volumes[k]);
        }
    }
    s
}

fn calendar(days: usize) -> String {
    (0..days).map(|t| format!("2021-03-{:02}\n", t + 1)).collect()
}

#[test]
fn raw_bars_to_log_variance_panel() {
    let days = 20;
    let skip = [(5, 0), (6, 0), (9, 4)];
    let loaded = read_ohlc(ohlc_csv(days, &skip).as_bytes(), &OhlcSchema::default()).unwrap();
    assert!(loaded.rejects.is_empty());
    let meta = read_meta(META.as_bytes()).unwrap();
    let universe = filter_universe(&loaded.series, &meta, &FilterRules::default()).unwrap();

    let kept: Vec<&str> = universe.series.keys().map(String::as_str).collect();
    assert_eq!(kept, ["600001", "600002", "600003"]);
    let rules: Vec<(&str, &str)> = universe
        .exclusions
        .iter()
        .map(|d| (d.ticker.as_str(), d.rule.as_str()))
        .collect();
    assert!(rules.contains(&("900001", "b_share")));
    assert!(rules.contains(&("01002", "dual_listing")));
    assert_eq!(universe.links, vec![("600002".to_string(), "600003".to_string())]);

    let cal = read_calendar(calendar(days).as_bytes()).unwrap();
    let aligned = apply_calendar(&universe.series, &cal).unwrap();
    assert_eq!(aligned.gaps["600001"], vec![5, 6]);
    let raw = variance_panel(&aligned);
    let out = impute_and_log(&raw, 9).unwrap();
    assert!(out.dropped.is_empty());
    assert_eq!(out.filled, 3);

    let panel = out.panel;
    assert_eq!(panel.n_dates(), days);
    let v = panel.values();
    // Hand-evaluated estimator on the first bar of firm 600002 (k = 2).
    let (o, h, l, c) = bar(0, 2);
    let hl = (h / l).ln();
    let co = (c / o).ln();
    let gk = hl * hl / 2.0 - (2.0 * 2f64.ln() - 1.0) * co * co;
    assert!((v[[0, 1]] - gk.ln()).abs() < 1e-12);
    // Carried forward through the two-day gap.
    assert_eq!(v[[5, 0]], v[[4, 0]]);
    assert_eq!(v[[6, 0]], v[[4, 0]]);
    assert_eq!(v[[9, 2]], v[[8, 2]]);
    assert!(v.iter().all(|x| x.is_finite()));
}

#[test]
fn long_gap_drops_the_firm() {
    let days = 20;
    let skip: Vec<(usize, usize)> = (3..14).map(|t| (t, 2)).collect();
    let loaded = read_ohlc(ohlc_csv(days, &skip).as_bytes(), &OhlcSchema::default()).unwrap();
    let meta = read_meta(META.as_bytes()).unwrap();
    let universe = filter_universe(&loaded.series, &meta, &FilterRules::default()).unwrap();
    let cal = read_calendar(calendar(days).as_bytes()).unwrap();
    let raw = variance_panel(&apply_calendar(&universe.series, &cal).unwrap());
    let out = impute_and_log(&raw, 9).unwrap();
    assert_eq!(out.panel.firms(), ["600001", "600003"]);
    assert_eq!(out.dropped.len(), 1);
    assert_eq!(out.dropped[0].rule, "extended_gap");
}

#[test]
fn panel_csv_round_trip() {
    let panel = {
        let days = 12;
        let loaded = read_ohlc(ohlc_csv(days, &[]).as_bytes(), &OhlcSchema::default()).unwrap();
        let meta = read_meta(META.as_bytes()).unwrap();
        let universe = filter_universe(&loaded.series, &meta, &FilterRules::default()).unwrap();
        let cal = read_calendar(calendar(days).as_bytes()).unwrap();
        impute_and_log(
            &variance_panel(&apply_calendar(&universe.series, &cal).unwrap()),
            9,
        )
        .unwrap()
        .panel
    };
    let mut buf = Vec::new();
    panel.write_csv(&mut buf).unwrap();
    let back = spillnet::VolatilityPanel::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, panel);
}

//! Property tests for loading and the derived indicators.

use pmgkit::indicators::{shock_decompose, zscore_boyd, zscore_yeyati, RollingWindowConfig};
use pmgkit::panel_data::{load_panel, CsvSchema, PanelDataset};
use proptest::prelude::*;

fn cell() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![1 => Just(None), 4 => (-1e6..1e6f64).prop_map(Some)]
}

/// Long-format rows for `n` entities over `t` periods with two variables.
fn panel_rows() -> impl Strategy<Value = Vec<(String, i64, Option<f64>, Option<f64>)>> {
    (1usize..5, 2usize..7).prop_flat_map(|(n, t)| {
        prop::collection::vec((cell(), cell()), n * t).prop_map(move |cells| {
            cells
                .into_iter()
                .enumerate()
                .map(|(k, (a, b))| (format!("bank{}", k / t), 2000 + (k % t) as i64, a, b))
                .collect()
        })
    })
}

fn render(rows: &[(String, i64, Option<f64>, Option<f64>)]) -> String {
    let fmt = |v: &Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
    let mut s = String::from("bank,year,car,roa\n");
    for (e, y, a, b) in rows {
        s.push_str(&format!("{e},{y},{},{}\n", fmt(a), fmt(b)));
    }
    s
}

fn load(text: &str) -> PanelDataset {
    load_panel(text.as_bytes(), &CsvSchema::new("bank", "year")).unwrap()
}

fn window_series(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(0.05..0.2f64, len),
        prop::collection::vec(-0.05..0.05f64, len),
    )
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())),
        (None, None) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn csv_round_trip_and_row_order(rows in panel_rows(), seed in any::<u64>()) {
        let data = load(&render(&rows));
        let again = load(&data.to_csv_string("bank", "year").unwrap());
        prop_assert_eq!(&data, &again);

        let mut shuffled = rows.clone();
        let k = shuffled.len();
        for i in (1..k).rev() {
            shuffled.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(&data, &load(&render(&shuffled)));
    }

    #[test]
    fn zscore_shift_and_scale((car, roa) in window_series(12), c in -0.5..0.5f64, k in 0.1..10.0f64) {
        let cfg = RollingWindowConfig::full(4).unwrap();
        let wrap = |v: &[f64]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
        let (car_o, roa_o) = (wrap(&car), wrap(&roa));
        let base1 = zscore_boyd(&car_o, &roa_o, &cfg).unwrap().values;
        let base2 = zscore_yeyati(&car_o, &roa_o, &cfg).unwrap().values;
        let sd = pmgkit::indicators::rolling_std(&roa_o, &cfg);

        let shifted: Vec<_> = car.iter().map(|x| Some(x + c)).collect();
        let s1 = zscore_boyd(&shifted, &roa_o, &cfg).unwrap().values;
        let s2 = zscore_yeyati(&shifted, &roa_o, &cfg).unwrap().values;
        for t in 0..car.len() {
            let step = sd[t].map(|s| c / s);
            prop_assert!(close(s2[t], base2[t].zip(step).map(|(z, d)| z + d), 1e-9));
            prop_assert!(close(s1[t], base1[t].zip(step).map(|(z, d)| z + d), 1e-9));
        }

        let scale = |v: &[f64]| v.iter().map(|&x| Some(k * x)).collect::<Vec<_>>();
        let k1 = zscore_boyd(&scale(&car), &scale(&roa), &cfg).unwrap().values;
        let k2 = zscore_yeyati(&scale(&car), &scale(&roa), &cfg).unwrap().values;
        for t in 0..car.len() {
            prop_assert!(close(k1[t], base1[t], 1e-9));
            prop_assert!(close(k2[t], base2[t], 1e-9));
        }

        let flat = vec![Some(car[0]); car.len()];
        prop_assert_eq!(
            zscore_boyd(&flat, &roa_o, &cfg).unwrap().values,
            zscore_yeyati(&flat, &roa_o, &cfg).unwrap().values
        );
    }

    #[test]
    fn positive_shock_iff_above_trailing_mean(
        price in prop::collection::vec(prop_oneof![1 => Just(None), 6 => (1.0..200.0f64).prop_map(Some)], 1..30),
        lookback in 1usize..5,
    ) {
        let s = shock_decompose(&price, lookback).unwrap();
        for t in 0..price.len() {
            let Some(pos) = s.positive[t] else { continue };
            let neg = s.negative[t].unwrap();
            let prev = &price[t - lookback..t];
            let mean = prev.iter().map(|v| v.unwrap()).sum::<f64>() / lookback as f64;
            let p = price[t].unwrap();
            prop_assert_eq!(pos > 0.0, p > mean);
            prop_assert_eq!(neg < 0.0, p < mean);
            prop_assert!(pos >= 0.0 && neg <= 0.0 && pos * neg == 0.0);
        }
    }
}

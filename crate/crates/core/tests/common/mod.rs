//! Helpers shared by the integration tests: a hand-stepped model of the
//! single-chain network that replays one working day at a time without the
//! event kernel.
#![allow(dead_code)]

use supsim_core::model::DayRecord;
use supsim_core::network::NodeId;
use supsim_core::scenario::{DemandModel, ScenarioConfig};

pub const STORE: NodeId = NodeId(0);
pub const DC: NodeId = NodeId(1);

/// One store, one DC, one supplier, one item, lead time 1 everywhere and one
/// customer per day in the middle of the day.
pub fn chain_config(quantities: Vec<u32>, store_s: u64, dc_s: u64, window: u32, days: u32) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(1, 1, 1, 1);
    c.name = "chain".into();
    c.level_values.lead_time_days = [1, 1, 1];
    c.network.supplier_lead_time_spread = 0;
    c.demand = DemandModel::Fixed {
        interval_hours: 8.0,
        first_arrival_hours: 4.0,
        quantities,
    };
    c.policy.store_order_up_to = store_s;
    c.policy.dc_order_up_to = dc_s;
    c.policy.forecast_window = window;
    c.policy.safety_stock_window = window;
    c.run.run_length_days = days;
    c
}

fn stdev_of_daily(history: &[i64], window: usize) -> f64 {
    // lead time 1: the rolling sums are the daily values themselves
    let start = history.len().saturating_sub(window);
    let xs: Vec<f64> = history[start..].iter().map(|&x| x as f64).collect();
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

struct Stock {
    on_hand: i64,
    on_order: i64,
    cap: i64,
    history: Vec<i64>,
}

/// Day-stepped replay. Each day: the customer arrives, yesterday's
/// shipments land, the store reviews, the DC takes the store order out of
/// free stock and reviews, then stock leaves and the day's demand is booked.
pub fn chain_oracle(quantities: &[u32], store_s: u64, dc_s: u64, window: usize, days: u64) -> Vec<DayRecord> {
    let mut store = Stock { on_hand: store_s as i64, on_order: 0, cap: store_s as i64, history: vec![] };
    let mut dc = Stock { on_hand: dc_s as i64, on_order: 0, cap: dc_s as i64, history: vec![] };
    // (store delivered, store requested) and DC quantity landing tomorrow
    let mut to_store: Option<(i64, i64)> = None;
    let mut to_dc: Option<i64> = None;
    let mut out = Vec::new();

    for day in 0..days {
        let want = quantities[day as usize % quantities.len()] as i64;
        let served = want.min(store.on_hand);
        store.on_hand -= served;

        if let Some((got, asked)) = to_store.take() {
            store.on_hand += got;
            store.on_order -= asked;
            assert!(store.on_hand <= store.cap);
        }
        if let Some(q) = to_dc.take() {
            dc.on_hand += q;
            dc.on_order -= q;
            assert!(dc.on_hand <= dc.cap);
        }

        let p = store.on_hand + store.on_order;
        let s = stdev_of_daily(&store.history, window);
        let q_store = if p as f64 <= s { (store.cap - p).max(0) } else { 0 };
        out.push(DayRecord {
            day,
            node: STORE,
            item: 0,
            on_hand: store.on_hand as u64,
            on_order: store.on_order as u64,
            position: p,
            order_quantity: q_store as u64,
            delivered: served as u64,
            lost: (want - served) as u64,
        });

        let accepted = q_store.min(dc.on_hand);
        store.on_order += q_store;

        let p_dc = dc.on_hand + dc.on_order - accepted;
        let s_dc = stdev_of_daily(&dc.history, window);
        let q_dc = if p_dc as f64 <= s_dc { (dc.cap - p_dc).max(0) } else { 0 };
        out.push(DayRecord {
            day,
            node: DC,
            item: 0,
            on_hand: dc.on_hand as u64,
            on_order: dc.on_order as u64,
            position: p_dc,
            order_quantity: q_dc as u64,
            delivered: accepted as u64,
            lost: (q_store - accepted) as u64,
        });
        dc.on_order += q_dc;

        dc.on_hand -= accepted;
        if q_store > 0 {
            to_store = Some((accepted, q_store));
        }
        if q_dc > 0 {
            to_dc = Some(q_dc);
        }
        store.history.push(want);
        dc.history.push(q_store);
    }
    out
}

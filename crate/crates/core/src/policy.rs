//! Order-point / order-up-to-level `(s, S)` inventory control.
//!
//! Position `P = Oh + Or - Sh`. The order point `s` is the safety stock,
//! the sample standard deviation of rolling lead-time demand. A review
//! orders `Q = S - P` whenever `P <= s`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemInventory {
    pub on_hand: u64,
    pub on_order: u64,
    pub to_ship: u64,
    /// Order-up-to level, the storage capacity for this item.
    pub order_up_to: u64,
    pub lead_time_days: u32,
    /// Demand per closed working day, oldest first.
    pub history: Vec<u64>,
    pub forecast_window: usize,
    pub safety_window: usize,
}

impl ItemInventory {
    /// A full warehouse with no history.
    pub fn full(order_up_to: u64, lead_time_days: u32, forecast_window: usize, safety_window: usize) -> Self {
        ItemInventory {
            on_hand: order_up_to,
            on_order: 0,
            to_ship: 0,
            order_up_to,
            lead_time_days,
            history: Vec::new(),
            forecast_window,
            safety_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReviewResult {
    pub position: i64,
    pub forecast: f64,
    pub lead_time_demand: f64,
    pub safety_stock: f64,
    pub order_point: f64,
    pub order_quantity: u64,
}

pub fn inventory_position(inv: &ItemInventory) -> i64 {
    inv.on_hand as i64 + inv.on_order as i64 - inv.to_ship as i64
}

/// Moving average of the last `window` days; 0 with no history.
pub fn forecast(history: &[u64], window: usize) -> f64 {
    let window = window.max(1);
    let tail = &history[history.len().saturating_sub(window)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().sum::<u64>() as f64 / tail.len() as f64
}

/// Forecast summed over the next `lead_time_days` days. The moving average
/// is flat, so every future day gets the same value.
pub fn lead_time_demand(daily_forecast: f64, lead_time_days: u32) -> f64 {
    (1..=lead_time_days).map(|_| daily_forecast).sum()
}

/// Sample standard deviation of the rolling `lead_time_days`-day demand sums
/// over the last `window` days of history.
pub fn safety_stock(history: &[u64], lead_time_days: u32, window: usize) -> f64 {
    let lt = lead_time_days.max(1) as usize;
    let tail = &history[history.len().saturating_sub(window)..];
    if tail.len() < lt + 1 {
        return 0.0;
    }
    let sums: Vec<f64> = tail
        .windows(lt)
        .map(|w| w.iter().sum::<u64>() as f64)
        .collect();
    let n = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let ss = sums.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

/// End-of-day review for one item.
pub fn review(inv: &ItemInventory) -> ReviewResult {
    let position = inventory_position(inv);
    let df = forecast(&inv.history, inv.forecast_window);
    let dlt = lead_time_demand(df, inv.lead_time_days);
    let ss = safety_stock(&inv.history, inv.lead_time_days, inv.safety_window);
    let order_point = ss;
    let order_quantity = if (position as f64) <= order_point {
        // with s >= S the condition can hold while there is nothing to add
        (inv.order_up_to as i64 - position).max(0) as u64
    } else {
        0
    };
    ReviewResult {
        position,
        forecast: df,
        lead_time_demand: dlt,
        safety_stock: ss,
        order_point,
        order_quantity,
    }
}

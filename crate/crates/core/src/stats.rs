//! Per-node performance records and the two fill-rate measures.

use serde::{Deserialize, Serialize};

use crate::network::{NodeId, NodeKind};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    /// Orders placed on this node (customer orders at stores, store orders at DCs).
    pub orders_received: u64,
    pub orders_fully_satisfied: u64,
    pub total_quantity_ordered: u64,
    pub total_quantity_lost: u64,
    pub arrival_times: Vec<f64>,
    pub ordered_quantities: Vec<u64>,
    /// Quantity handed over for each order in `ordered_quantities`.
    pub delivered_quantities: Vec<u64>,
    /// Replenishment quantities this node received from upstream.
    pub received_quantities: Vec<u64>,
    /// Hours between placing and receiving each replenishment.
    pub waiting_times: Vec<f64>,
    /// Time average of on-hand stock summed over items.
    pub avg_on_hand: f64,
}

impl NodeStats {
    pub fn record_order(&mut self, at: f64, requested: u64, delivered: u64) {
        self.orders_received += 1;
        if delivered >= requested {
            self.orders_fully_satisfied += 1;
        }
        self.total_quantity_ordered += requested;
        self.total_quantity_lost += requested - delivered;
        self.arrival_times.push(at);
        self.ordered_quantities.push(requested);
        self.delivered_quantities.push(delivered);
    }

    pub fn record_receipt(&mut self, quantity: u64, waited: f64) {
        self.received_quantities.push(quantity);
        self.waiting_times.push(waited);
    }
}

/// Satisfied orders over all orders; 1 when there were none.
pub fn fill_rate_orders(stats: &NodeStats) -> f64 {
    if stats.orders_received == 0 {
        1.0
    } else {
        stats.orders_fully_satisfied as f64 / stats.orders_received as f64
    }
}

/// Lost quantity over ordered quantity; 0 when nothing was ordered.
pub fn fill_rate_quantity(stats: &NodeStats) -> f64 {
    if stats.total_quantity_ordered == 0 {
        0.0
    } else {
        stats.total_quantity_lost as f64 / stats.total_quantity_ordered as f64
    }
}

/// The exported per-node row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node_id: NodeId,
    pub node_kind: NodeKind,
    pub orders_received: u64,
    pub orders_satisfied: u64,
    pub fill_rate_orders: f64,
    pub qty_ordered: u64,
    pub qty_lost: u64,
    pub fill_rate_quantity: f64,
    pub avg_on_hand: f64,
}

impl NodeSummary {
    pub fn from_stats(node_id: NodeId, node_kind: NodeKind, s: &NodeStats) -> Self {
        NodeSummary {
            node_id,
            node_kind,
            orders_received: s.orders_received,
            orders_satisfied: s.orders_fully_satisfied,
            fill_rate_orders: fill_rate_orders(s),
            qty_ordered: s.total_quantity_ordered,
            qty_lost: s.total_quantity_lost,
            fill_rate_quantity: fill_rate_quantity(s),
            avg_on_hand: s.avg_on_hand,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(received: u64, satisfied: u64, ordered: u64, lost: u64) -> NodeStats {
        NodeStats {
            orders_received: received,
            orders_fully_satisfied: satisfied,
            total_quantity_ordered: ordered,
            total_quantity_lost: lost,
            ..NodeStats::default()
        }
    }

    #[test]
    fn order_fill_rate() {
        assert_eq!(fill_rate_orders(&stats(100, 90, 0, 0)), 0.9);
        assert_eq!(fill_rate_orders(&stats(0, 0, 0, 0)), 1.0);
        assert_eq!(fill_rate_orders(&stats(10, 0, 0, 0)), 0.0);
    }

    #[test]
    fn quantity_fill_rate() {
        assert_eq!(fill_rate_quantity(&stats(1, 0, 1000, 50)), 0.05);
        assert_eq!(fill_rate_quantity(&stats(1, 1, 1000, 0)), 0.0);
        assert_eq!(fill_rate_quantity(&stats(1, 0, 1000, 1000)), 1.0);
        assert_eq!(fill_rate_quantity(&stats(0, 0, 0, 0)), 0.0);
    }

    #[test]
    fn partial_order_is_not_satisfied() {
        let mut s = NodeStats::default();
        s.record_order(1.0, 20, 5);
        s.record_order(2.0, 20, 20);
        assert_eq!(s.orders_received, 2);
        assert_eq!(s.orders_fully_satisfied, 1);
        assert_eq!(s.total_quantity_lost, 15);
        assert_eq!(s.delivered_quantities, vec![5, 20]);
    }
}

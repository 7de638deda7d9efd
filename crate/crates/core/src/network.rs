//! Network topology: stores, distribution centers and suppliers with their
//! per-item inventories and lead times.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::ItemInventory;
use crate::scenario::{ConfigError, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Store,
    DistributionCenter,
    Supplier,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Store => "store",
            NodeKind::DistributionCenter => "distribution_center",
            NodeKind::Supplier => "supplier",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("distribution center {dc} has no supplier for item {item}")]
    NoSupplier { dc: NodeId, item: u32 },
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Candidate sources. Stores have exactly one (their home DC).
    pub upstream: Vec<NodeId>,
    /// Per-item lead time from each upstream node, `[upstream index][item]`.
    pub lead_times: Vec<Vec<u32>>,
    /// Per-item stock; empty for suppliers.
    pub inventory: Vec<ItemInventory>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub stores: u32,
    pub distribution_centers: u32,
    pub suppliers: u32,
    pub items: u32,
}

/// Argmin of lead time; ties go to the lowest node id.
pub fn select_supplier(candidates: &[(NodeId, u32)]) -> Option<NodeId> {
    candidates
        .iter()
        .min_by_key(|(id, lt)| (*lt, *id))
        .map(|(id, _)| *id)
}

impl Network {
    /// Stores first, then distribution centers, then suppliers. Stores are
    /// split into contiguous equal blocks, one per DC. Every supplier can
    /// serve every DC.
    pub fn build(config: &ScenarioConfig) -> Result<Network, ConfigError> {
        config.validate()?;
        let n = &config.network;
        let dc_base = n.stores;
        let sup_base = n.stores + n.distribution_centers;
        let fw = config.policy.forecast_window as usize;
        let sw = config.policy.safety_stock_window as usize;
        let params: Vec<_> = (0..n.items).map(|i| config.item_params(i)).collect();

        let mut nodes = Vec::with_capacity((sup_base + n.suppliers) as usize);
        for s in 0..n.stores {
            let home = NodeId(dc_base + s * n.distribution_centers / n.stores);
            nodes.push(Node {
                id: NodeId(s),
                kind: NodeKind::Store,
                upstream: vec![home],
                lead_times: vec![params.iter().map(|p| p.lead_time_days).collect()],
                inventory: params
                    .iter()
                    .map(|p| ItemInventory::full(p.store_order_up_to, p.lead_time_days, fw, sw))
                    .collect(),
            });
        }
        for d in 0..n.distribution_centers {
            let upstream: Vec<NodeId> = (0..n.suppliers).map(|j| NodeId(sup_base + j)).collect();
            let lead_times: Vec<Vec<u32>> = (0..n.suppliers)
                .map(|j| {
                    (0..n.items)
                        .map(|i| {
                            params[i as usize].lead_time_days
                                + (j + i) % (n.supplier_lead_time_spread + 1)
                        })
                        .collect()
                })
                .collect();
            let inventory = (0..n.items)
                .map(|i| {
                    let best = lead_times.iter().map(|lt| lt[i as usize]).min().unwrap_or(1);
                    ItemInventory::full(params[i as usize].dc_order_up_to, best, fw, sw)
                })
                .collect();
            nodes.push(Node {
                id: NodeId(dc_base + d),
                kind: NodeKind::DistributionCenter,
                upstream,
                lead_times,
                inventory,
            });
        }
        for j in 0..n.suppliers {
            nodes.push(Node {
                id: NodeId(sup_base + j),
                kind: NodeKind::Supplier,
                upstream: vec![],
                lead_times: vec![],
                inventory: vec![],
            });
        }
        Ok(Network {
            nodes,
            stores: n.stores,
            distribution_centers: n.distribution_centers,
            suppliers: n.suppliers,
            items: n.items,
        })
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.0 as usize]
    }

    pub fn store_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.stores).map(NodeId)
    }

    pub fn dc_ids(&self) -> impl Iterator<Item = NodeId> {
        (self.stores..self.stores + self.distribution_centers).map(NodeId)
    }

    pub fn home_dc(&self, store: NodeId) -> NodeId {
        self.node(store).upstream[0]
    }

    pub fn inventory_count(&self) -> usize {
        self.nodes.iter().map(|n| n.inventory.len()).sum()
    }

    /// Lead time from `source` to `node` for `item`.
    pub fn lead_time(&self, node: NodeId, source: NodeId, item: u32) -> Option<u32> {
        let n = self.node(node);
        let k = n.upstream.iter().position(|u| *u == source)?;
        n.lead_times.get(k)?.get(item as usize).copied()
    }

    pub fn select_supplier(&self, dc: NodeId, item: u32) -> Result<NodeId, NetworkError> {
        let n = self.node(dc);
        let candidates: Vec<(NodeId, u32)> = n
            .upstream
            .iter()
            .zip(&n.lead_times)
            .filter_map(|(id, lts)| lts.get(item as usize).map(|lt| (*id, *lt)))
            .collect();
        select_supplier(&candidates).ok_or(NetworkError::NoSupplier { dc, item })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_network_counts() {
        let net = Network::build(&ScenarioConfig::full_network()).unwrap();
        assert_eq!(net.nodes.len(), 63);
        assert_eq!(net.inventory_count(), 50 * 30 + 3 * 30);
        assert_eq!(net.store_ids().count(), 50);
        // 50 stores over 3 DCs: blocks of 17, 17, 16
        let per_dc: Vec<usize> = net
            .dc_ids()
            .map(|dc| net.store_ids().filter(|s| net.home_dc(*s) == dc).count())
            .collect();
        assert_eq!(per_dc, vec![17, 17, 16]);
    }

    #[test]
    fn minimal_chain() {
        let net = Network::build(&ScenarioConfig::new(1, 1, 1, 1)).unwrap();
        assert_eq!(net.nodes.len(), 3);
        assert_eq!(net.home_dc(NodeId(0)), NodeId(1));
        assert_eq!(net.node(NodeId(2)).kind, NodeKind::Supplier);
        let inv = &net.node(NodeId(0)).inventory[0];
        assert_eq!(inv.on_hand, inv.order_up_to);
    }

    #[test]
    fn zero_stores_is_config_error() {
        let err = Network::build(&ScenarioConfig::new(0, 1, 1, 1)).unwrap_err();
        assert_eq!(err.path, "network.stores");
    }

    #[test]
    fn supplier_argmin_and_ties() {
        assert_eq!(
            select_supplier(&[(NodeId(1), 4), (NodeId(2), 2), (NodeId(3), 3)]),
            Some(NodeId(2))
        );
        assert_eq!(select_supplier(&[(NodeId(2), 2), (NodeId(1), 2)]), Some(NodeId(1)));
        assert_eq!(select_supplier(&[]), None);
    }

    #[test]
    fn dc_without_supplier_candidates() {
        let mut net = Network::build(&ScenarioConfig::new(1, 1, 1, 1)).unwrap();
        net.node_mut(NodeId(1)).upstream.clear();
        net.node_mut(NodeId(1)).lead_times.clear();
        assert_eq!(
            net.select_supplier(NodeId(1), 0),
            Err(NetworkError::NoSupplier { dc: NodeId(1), item: 0 })
        );
    }

    #[test]
    fn supplier_offsets_follow_pattern() {
        let mut c = ScenarioConfig::new(2, 1, 3, 2);
        c.network.supplier_lead_time_spread = 2;
        let net = Network::build(&c).unwrap();
        let dc = NodeId(2);
        // level 0 lead time is 3 days; supplier j adds (j + item) % 3
        assert_eq!(net.lead_time(dc, NodeId(3), 0), Some(3));
        assert_eq!(net.lead_time(dc, NodeId(4), 0), Some(4));
        assert_eq!(net.lead_time(dc, NodeId(5), 1), Some(3));
        assert_eq!(net.select_supplier(dc, 1), Ok(NodeId(5)));
        assert_eq!(net.select_supplier(dc, 0), Ok(NodeId(3)));
    }
}

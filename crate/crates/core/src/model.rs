//! The supply chain as a discrete-event model.
//!
//! Three kinds of entity live on the kernel's calendar:
//!
//! * one customer-arrival entity per `(store, item)`, which serves a
//!   customer and re-schedules itself after the next inter-arrival time;
//! * a single day-end entity firing at the close of each working day, which
//!   runs every store review, passes store orders to the DCs, runs every DC
//!   review, ships, and closes the demand-history day;
//! * one shipment entity per replenishment order in transit.
//!
//! Shipments spawned by a day-end are queued before the day-end re-schedules
//! itself, so a shipment due at a day boundary is always received before
//! that boundary's reviews run.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use supsim_des::{EntityId, Kernel, KernelError, Model, RunReport, SimTime};
use thiserror::Error;

use crate::calendar::WorkCalendar;
use crate::network::{Network, NetworkError, NodeId, NodeKind};
use crate::policy::{review, ReviewResult};
use crate::scenario::{ConfigError, DemandModel, ItemParams, ScenarioConfig};
use crate::stats::{NodeStats, NodeSummary};
use crate::stochastic::{self, Purpose, SamplingError, StreamKey, StreamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    CustomerArrival { store: NodeId, item: u32 },
    DayEnd,
    Shipment(OrderId),
}

/// A replenishment request from `requester` to its `source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub requester: NodeId,
    pub source: NodeId,
    pub item: u32,
    pub quantity_requested: u64,
    pub quantity_delivered: u64,
    pub quantity_lost: u64,
    pub placed_at: f64,
    pub received_at: Option<f64>,
}

/// One `(node, item)` review as seen at the close of a day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: u64,
    pub node: NodeId,
    pub item: u32,
    pub on_hand: u64,
    pub on_order: u64,
    pub position: i64,
    pub order_quantity: u64,
    /// Handed to downstream requesters during the day.
    pub delivered: u64,
    pub lost: u64,
}

/// Shared handles for cancelling a run and watching its progress.
#[derive(Debug, Clone, Default)]
pub struct RunControl {
    pub cancel: Arc<AtomicBool>,
    pub days_done: Arc<AtomicU64>,
}

impl RunControl {
    pub fn stop(&self) {
        self.cancel.store(true, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub trace: bool,
    /// Keep this many leading uniforms from every random stream.
    pub log_uniforms: usize,
    pub control: Option<RunControl>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("run stopped")]
    Cancelled,
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("run stopped")]
    Cancelled,
    #[error("simulation failed: {0}")]
    Model(String),
}

impl From<KernelError> for SimError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::HandlerFailure { entity, source } => {
                match source.downcast_ref::<ModelError>() {
                    Some(ModelError::Cancelled) => SimError::Cancelled,
                    _ => SimError::Model(format!("entity {entity}: {source}")),
                }
            }
            other => SimError::Model(other.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Stores then distribution centers, in node order.
    pub nodes: Vec<NodeSummary>,
    pub stats: Vec<NodeStats>,
    pub trace: Vec<DayRecord>,
    pub uniform_log: BTreeMap<StreamKey, Vec<f64>>,
    pub orders: Vec<Order>,
    pub report: RunReport,
}

#[derive(Debug, Clone, Copy, Default)]
struct Balance {
    start: u64,
    received: u64,
    delivered: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct OnHandArea {
    since: f64,
    area: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct DayTotals {
    demand: u64,
    delivered: u64,
    lost: u64,
}

type Grid<T> = Vec<Vec<T>>;

pub struct SupplyChainModel {
    calendar: WorkCalendar,
    demand: DemandModel,
    params: Vec<ItemParams>,
    pub network: Network,
    streams: StreamSet,
    orders: Vec<Order>,
    open_orders: BTreeSet<OrderId>,
    stats: Vec<NodeStats>,
    day: u64,
    run_days: u64,
    warmup_days: u64,
    stats_since: f64,
    today: Grid<DayTotals>,
    balance: Grid<Balance>,
    area: Grid<OnHandArea>,
    fixed_next: Grid<usize>,
    trace: Option<Vec<DayRecord>>,
    control: Option<RunControl>,
}

impl SupplyChainModel {
    pub fn new(config: &ScenarioConfig, run_seed: u64, options: &SimOptions) -> Result<Self, ConfigError> {
        let network = Network::build(config)?;
        let stocked = (network.stores + network.distribution_centers) as usize;
        let items = network.items as usize;
        let mut streams = StreamSet::new(run_seed);
        streams.log_uniforms(options.log_uniforms);
        let balance = (0..stocked)
            .map(|n| {
                network.nodes[n]
                    .inventory
                    .iter()
                    .map(|inv| Balance {
                        start: inv.on_hand,
                        ..Balance::default()
                    })
                    .collect()
            })
            .collect();
        Ok(SupplyChainModel {
            calendar: WorkCalendar::default(),
            demand: config.demand.clone(),
            params: (0..network.items).map(|i| config.item_params(i)).collect(),
            network,
            streams,
            orders: Vec::new(),
            open_orders: BTreeSet::new(),
            stats: vec![NodeStats::default(); stocked],
            day: 0,
            run_days: u64::from(config.run.run_length_days),
            warmup_days: u64::from(config.run.warmup_days),
            stats_since: 0.0,
            today: vec![vec![DayTotals::default(); items]; stocked],
            balance,
            area: vec![vec![OnHandArea::default(); items]; stocked],
            fixed_next: vec![vec![0; items]; stocked],
            trace: options.trace.then(Vec::new),
            control: options.control.clone(),
        })
    }

    pub fn calendar(&self) -> WorkCalendar {
        self.calendar
    }

    pub fn day(&self) -> u64 {
        self.day
    }

    pub fn stats(&self, node: NodeId) -> &NodeStats {
        &self.stats[node.0 as usize]
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    /// Initialisation phase: first customer per `(store, item)` and the
    /// first day-end.
    pub fn initialise(&mut self, kernel: &mut Kernel<Activity>) -> Result<(), ModelError> {
        kernel.spawn(Activity::DayEnd, SimTime::new(self.calendar.end_of_day(0))?)?;
        let stores: Vec<NodeId> = self.network.store_ids().collect();
        for store in stores {
            for item in 0..self.network.items {
                let first = match &self.demand {
                    DemandModel::Stochastic => self.next_gap(store, item)?,
                    DemandModel::Fixed {
                        first_arrival_hours, ..
                    } => *first_arrival_hours,
                };
                kernel.spawn(Activity::CustomerArrival { store, item }, SimTime::new(first)?)?;
            }
        }
        Ok(())
    }

    fn next_gap(&mut self, store: NodeId, item: u32) -> Result<f64, ModelError> {
        match &self.demand {
            DemandModel::Stochastic => {
                let mean = self.params[item as usize].interarrival_hours;
                let s = self.streams.stream(StreamKey::new(store.0, item, Purpose::Interarrival));
                Ok(stochastic::interarrival(s, mean)?)
            }
            DemandModel::Fixed { interval_hours, .. } => Ok(*interval_hours),
        }
    }

    fn next_quantity(&mut self, store: NodeId, item: u32) -> Result<u64, ModelError> {
        match &self.demand {
            DemandModel::Stochastic => {
                let q = self.params[item as usize].quantity;
                let s = self.streams.stream(StreamKey::new(store.0, item, Purpose::Quantity));
                Ok(u64::from(stochastic::demand_quantity(s, q.min, q.mode, q.max)?))
            }
            DemandModel::Fixed { quantities, .. } => {
                let k = &mut self.fixed_next[store.0 as usize][item as usize];
                let q = quantities[*k % quantities.len()];
                *k += 1;
                Ok(u64::from(q))
            }
        }
    }

    fn set_on_hand(&mut self, node: NodeId, item: u32, value: u64, at: f64) {
        let (n, i) = (node.0 as usize, item as usize);
        let inv = &mut self.network.nodes[n].inventory[i];
        let a = &mut self.area[n][i];
        a.area += inv.on_hand as f64 * (at - a.since);
        a.since = at;
        inv.on_hand = value;
    }

    /// Serve one customer at `store`: deliver what is on hand, lose the rest.
    /// Returns `(delivered, lost)`.
    pub fn on_customer_arrival(&mut self, store: NodeId, item: u32, qty: u64, at: f64) -> (u64, u64) {
        let (n, i) = (store.0 as usize, item as usize);
        let on_hand = self.network.nodes[n].inventory[i].on_hand;
        let delivered = qty.min(on_hand);
        let lost = qty - delivered;
        self.set_on_hand(store, item, on_hand - delivered, at);
        self.stats[n].record_order(at, qty, delivered);
        self.balance[n][i].delivered += delivered;
        let t = &mut self.today[n][i];
        t.demand += qty;
        t.delivered += delivered;
        t.lost += lost;
        (delivered, lost)
    }

    fn new_order(&mut self, requester: NodeId, source: NodeId, item: u32, qty: u64, at: f64) -> OrderId {
        let id = OrderId(self.orders.len() as u64);
        self.orders.push(Order {
            id,
            requester,
            source,
            item,
            quantity_requested: qty,
            quantity_delivered: 0,
            quantity_lost: 0,
            placed_at: at,
            received_at: None,
        });
        self.open_orders.insert(id);
        self.network.node_mut(requester).inventory[item as usize].on_order += qty;
        id
    }

    /// A source accepts an order. A DC commits what it has not already
    /// promised (the rest is lost at the DC) and a supplier commits all of it.
    pub fn accept_order(&mut self, id: OrderId, at: f64) {
        let order = self.orders[id.0 as usize].clone();
        let (src, item) = (order.source.0 as usize, order.item as usize);
        let accepted = match self.network.nodes[src].kind {
            NodeKind::Supplier => order.quantity_requested,
            _ => {
                let inv = &mut self.network.nodes[src].inventory[item];
                let free = inv.on_hand - inv.to_ship;
                let accepted = order.quantity_requested.min(free);
                inv.to_ship += accepted;
                let lost = order.quantity_requested - accepted;
                self.stats[src].record_order(at, order.quantity_requested, accepted);
                let t = &mut self.today[src][item];
                t.demand += order.quantity_requested;
                t.delivered += accepted;
                t.lost += lost;
                accepted
            }
        };
        let o = &mut self.orders[id.0 as usize];
        o.quantity_delivered = accepted;
        o.quantity_lost = o.quantity_requested - accepted;
    }

    /// Dispatch an accepted order: the source releases the committed stock
    /// and a shipment is scheduled to arrive after the lead time.
    pub fn fulfill_order(&mut self, kernel: &mut Kernel<Activity>, id: OrderId, at: f64) -> Result<(), ModelError> {
        let order = self.orders[id.0 as usize].clone();
        let src = order.source;
        if self.network.node(src).kind != NodeKind::Supplier {
            let inv = &self.network.node(src).inventory[order.item as usize];
            let (on_hand, to_ship) = (inv.on_hand, inv.to_ship);
            if to_ship < order.quantity_delivered || on_hand < order.quantity_delivered {
                return Err(ModelError::Invariant(format!(
                    "node {src} item {} ships {} with on-hand {on_hand} to-ship {to_ship}",
                    order.item, order.quantity_delivered
                )));
            }
            self.set_on_hand(src, order.item, on_hand - order.quantity_delivered, at);
            self.network.node_mut(src).inventory[order.item as usize].to_ship -= order.quantity_delivered;
            self.balance[src.0 as usize][order.item as usize].delivered += order.quantity_delivered;
        }
        let lt = self
            .network
            .lead_time(order.requester, src, order.item)
            .ok_or_else(|| ModelError::Invariant(format!("no lead time {src} -> {}", order.requester)))?;
        let due = SimTime::new(at + self.calendar.days_to_hours(lt))?;
        kernel.spawn(Activity::Shipment(id), due)?;
        Ok(())
    }

    /// A shipment reaches its requester.
    pub fn receive(&mut self, id: OrderId, at: f64) -> Result<(), ModelError> {
        let order = self.orders[id.0 as usize].clone();
        let (n, i) = (order.requester.0 as usize, order.item as usize);
        let inv = &self.network.nodes[n].inventory[i];
        let (on_hand, on_order, cap) = (inv.on_hand, inv.on_order, inv.order_up_to);
        if on_hand + order.quantity_delivered > cap {
            return Err(ModelError::Invariant(format!(
                "node {} item {i}: receipt of {} over on-hand {on_hand} exceeds S = {cap}",
                order.requester, order.quantity_delivered
            )));
        }
        if on_order < order.quantity_requested {
            return Err(ModelError::Invariant(format!(
                "node {} item {i}: on-order {on_order} below receipt {}",
                order.requester, order.quantity_requested
            )));
        }
        self.set_on_hand(order.requester, order.item, on_hand + order.quantity_delivered, at);
        self.network.nodes[n].inventory[i].on_order -= order.quantity_requested;
        self.balance[n][i].received += order.quantity_delivered;
        self.stats[n].record_receipt(order.quantity_delivered, at - order.placed_at);
        self.orders[id.0 as usize].received_at = Some(at);
        self.open_orders.remove(&id);
        Ok(())
    }

    fn review_node(&mut self, node: NodeId, item: u32) -> ReviewResult {
        let (n, i) = (node.0 as usize, item as usize);
        let inv = &self.network.nodes[n].inventory[i];
        let r = review(inv);
        if let Some(trace) = self.trace.as_mut() {
            let t = self.today[n][i];
            trace.push(DayRecord {
                day: self.day,
                node,
                item,
                on_hand: inv.on_hand,
                on_order: inv.on_order,
                position: r.position,
                order_quantity: r.order_quantity,
                delivered: t.delivered,
                lost: t.lost,
            });
        }
        r
    }

    /// Close the current working day. Returns the orders placed.
    pub fn end_of_day(&mut self, kernel: &mut Kernel<Activity>) -> Result<Vec<OrderId>, ModelError> {
        let at = kernel.clock().hours();
        let items = self.network.items;
        let mut placed = Vec::new();

        let stores: Vec<NodeId> = self.network.store_ids().collect();
        for &store in &stores {
            let dc = self.network.home_dc(store);
            for item in 0..items {
                let q = self.review_node(store, item).order_quantity;
                if q > 0 {
                    let id = self.new_order(store, dc, item, q, at);
                    self.accept_order(id, at);
                    placed.push(id);
                }
            }
        }
        let dcs: Vec<NodeId> = self.network.dc_ids().collect();
        for &dc in &dcs {
            for item in 0..items {
                let q = self.review_node(dc, item).order_quantity;
                if q > 0 {
                    let supplier = self.network.select_supplier(dc, item)?;
                    let id = self.new_order(dc, supplier, item, q, at);
                    self.accept_order(id, at);
                    placed.push(id);
                }
            }
        }
        for &id in &placed {
            self.fulfill_order(kernel, id, at)?;
        }

        for node in stores.iter().chain(&dcs) {
            let n = node.0 as usize;
            for i in 0..items as usize {
                let demand = std::mem::take(&mut self.today[n][i]).demand;
                self.network.nodes[n].inventory[i].history.push(demand);
            }
        }

        if self.calendar.closes_week(self.day) {
            self.check_balances()?;
            self.check_ledger()?;
        }
        if self.day + 1 == self.warmup_days {
            self.restart_statistics(at);
        }
        if let Some(c) = &self.control {
            c.days_done.fetch_add(1, Ordering::SeqCst);
            if c.cancel.load(Ordering::SeqCst) {
                return Err(ModelError::Cancelled);
            }
        }
        Ok(placed)
    }

    fn restart_statistics(&mut self, at: f64) {
        for s in self.stats.iter_mut() {
            *s = NodeStats::default();
        }
        for row in self.area.iter_mut() {
            for a in row.iter_mut() {
                *a = OnHandArea { since: at, area: 0.0 };
            }
        }
        self.stats_since = at;
    }

    /// On-hand at the end of the week must equal on-hand at its start plus
    /// receipts minus deliveries.
    pub fn check_balances(&mut self) -> Result<(), ModelError> {
        for (n, row) in self.balance.iter_mut().enumerate() {
            for (i, b) in row.iter_mut().enumerate() {
                let on_hand = self.network.nodes[n].inventory[i].on_hand;
                let expected = (b.start + b.received).checked_sub(b.delivered);
                if expected != Some(on_hand) {
                    return Err(ModelError::Invariant(format!(
                        "week {} node {n} item {i}: start {} + received {} - delivered {} != on-hand {on_hand}",
                        self.calendar.week_of(self.day),
                        b.start,
                        b.received,
                        b.delivered
                    )));
                }
                *b = Balance {
                    start: on_hand,
                    ..Balance::default()
                };
            }
        }
        Ok(())
    }

    /// On-order must match the open order book and nothing may remain to ship.
    pub fn check_ledger(&self) -> Result<(), ModelError> {
        let mut open: BTreeMap<(NodeId, u32), u64> = BTreeMap::new();
        for id in &self.open_orders {
            let o = &self.orders[id.0 as usize];
            *open.entry((o.requester, o.item)).or_default() += o.quantity_requested;
        }
        for node in self.network.store_ids().chain(self.network.dc_ids()) {
            for item in 0..self.network.items {
                let inv = &self.network.node(node).inventory[item as usize];
                let book = open.get(&(node, item)).copied().unwrap_or(0);
                if inv.on_order != book {
                    return Err(ModelError::Invariant(format!(
                        "node {node} item {item}: on-order {} but open orders total {book}",
                        inv.on_order
                    )));
                }
                if inv.to_ship != 0 {
                    return Err(ModelError::Invariant(format!(
                        "node {node} item {item}: {} left to ship after dispatch",
                        inv.to_ship
                    )));
                }
            }
        }
        Ok(())
    }

    fn finish(mut self, report: RunReport, horizon: f64) -> RunOutput {
        let stocked = self.stats.len();
        for n in 0..stocked {
            let mut total = 0.0;
            for i in 0..self.network.items as usize {
                let a = self.area[n][i];
                let oh = self.network.nodes[n].inventory[i].on_hand as f64;
                total += a.area + oh * (horizon - a.since).max(0.0);
            }
            let span = horizon - self.stats_since;
            self.stats[n].avg_on_hand = if span > 0.0 { total / span } else { 0.0 };
        }
        let nodes = (0..stocked)
            .map(|n| {
                let node = &self.network.nodes[n];
                NodeSummary::from_stats(node.id, node.kind, &self.stats[n])
            })
            .collect();
        RunOutput {
            nodes,
            stats: self.stats,
            trace: self.trace.unwrap_or_default(),
            uniform_log: self.streams.uniform_log(),
            orders: self.orders,
            report,
        }
    }
}

impl Model for SupplyChainModel {
    type Payload = Activity;
    type Error = ModelError;

    fn activate(&mut self, kernel: &mut Kernel<Activity>, entity: EntityId) -> Result<(), ModelError> {
        let activity = *kernel
            .payload(entity)
            .ok_or_else(|| ModelError::Invariant(format!("no payload for {entity}")))?;
        let at = kernel.clock().hours();
        match activity {
            Activity::CustomerArrival { store, item } => {
                let qty = self.next_quantity(store, item)?;
                self.on_customer_arrival(store, item, qty, at);
                let gap = self.next_gap(store, item)?;
                kernel.schedule(entity, kernel.clock().after(gap)?)?;
            }
            Activity::DayEnd => {
                self.end_of_day(kernel)?;
                self.day += 1;
                if self.day < self.run_days {
                    kernel.schedule(entity, SimTime::new(self.calendar.end_of_day(self.day))?)?;
                } else {
                    kernel.terminate(entity)?;
                }
            }
            Activity::Shipment(id) => {
                self.receive(id, at)?;
                kernel.terminate(entity)?;
            }
        }
        Ok(())
    }
}

/// Build the network, run it for the configured number of working days and
/// collect the statistics.
pub fn simulate(config: &ScenarioConfig, run_seed: u64, options: &SimOptions) -> Result<RunOutput, SimError> {
    let mut model = SupplyChainModel::new(config, run_seed, options)?;
    let mut kernel = Kernel::new();
    model.initialise(&mut kernel).map_err(|e| SimError::Model(e.to_string()))?;
    let horizon = model.calendar.end_of_day(model.run_days - 1);
    let report = kernel.run(SimTime::new(horizon).map_err(SimError::from)?, &mut model)?;
    Ok(model.finish(report, horizon))
}

use sha2::{Digest, Sha256};
use supsim_core::experiments::{replicate, run_scenario, ReplicateOptions};
use supsim_core::export::write_csv;
use supsim_core::model::{simulate, SimError, SimOptions};
use supsim_core::network::NodeKind;
use supsim_core::scenario::{DemandModel, FactorLevels, Level, ScenarioConfig};
use supsim_core::stochastic::StreamKey;

fn csv_digest(config: &ScenarioConfig) -> String {
    let res = replicate(config, &ReplicateOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_csv(&[res], &mut buf).unwrap();
    hex::encode(Sha256::digest(&buf))
}

#[test]
fn same_seed_gives_identical_csv() {
    let mut c = ScenarioConfig::reduced();
    c.run.run_length_days = 60;
    assert_eq!(csv_digest(&c), csv_digest(&c));
    let serial = ReplicateOptions {
        jobs: 1,
        ..ReplicateOptions::default()
    };
    let a = replicate(&c, &serial).unwrap();
    let b = replicate(&c, &ReplicateOptions::default()).unwrap();
    assert_eq!(a, b);
    c.run.master_seed = 2;
    let other = csv_digest(&c);
    c.run.master_seed = 1;
    assert_ne!(csv_digest(&c), other);
}

fn uniform_prefix(config: &ScenarioConfig, rep: u32) -> std::collections::BTreeMap<StreamKey, Vec<f64>> {
    let opts = SimOptions {
        log_uniforms: 100,
        ..SimOptions::default()
    };
    run_scenario(config, rep, &opts).unwrap().uniform_log
}

#[test]
fn crn_scenarios_share_uniform_prefixes() {
    let mut a = ScenarioConfig::reduced();
    a.run.crn = true;
    a.run.run_length_days = 120;
    let mut b = a.clone();
    b.name = "other".into();
    b.factors = FactorLevels::new(Level::Plus, Level::Minus, Level::Plus);
    for rep in 0..3 {
        let (ua, ub) = (uniform_prefix(&a, rep), uniform_prefix(&b, rep));
        assert!(!ua.is_empty());
        for (key, xs) in &ua {
            assert_eq!(xs.len(), 100, "{key:?}");
            assert_eq!(Some(xs), ub.get(key), "{key:?}");
        }
    }
    // without CRN the streams differ
    a.run.crn = false;
    b.run.crn = false;
    assert_ne!(uniform_prefix(&a, 0), uniform_prefix(&b, 0));
}

#[test]
fn full_network_emits_store_and_dc_records() {
    let mut c = ScenarioConfig::full_network();
    c.run.run_length_days = 30;
    let out = run_scenario(&c, 0, &SimOptions::default()).unwrap();
    assert_eq!(out.nodes.len(), 53);
    assert_eq!(out.nodes.iter().filter(|n| n.node_kind == NodeKind::Store).count(), 50);
}

#[test]
fn zero_demand_never_orders() {
    let mut c = ScenarioConfig::new(3, 2, 2, 2);
    c.demand = DemandModel::Fixed {
        interval_hours: 8.0,
        // first customer after the horizon
        first_arrival_hours: 10_000.0,
        quantities: vec![5],
    };
    c.run.run_length_days = 60;
    let out = simulate(&c, 7, &SimOptions::default()).unwrap();
    assert!(out.orders.is_empty());
    for n in &out.nodes {
        assert_eq!(n.fill_rate_orders, 1.0);
        assert_eq!(n.fill_rate_quantity, 0.0);
    }
}

#[test]
fn ample_stock_gives_full_service() {
    let mut c = ScenarioConfig::reduced();
    c.policy.store_order_up_to = 1_000_000;
    c.policy.dc_order_up_to = 1_000_000;
    c.run.run_length_days = 60;
    let out = simulate(&c, 3, &SimOptions::default()).unwrap();
    for n in out.nodes.iter().filter(|n| n.node_kind == NodeKind::Store) {
        assert_eq!(n.fill_rate_orders, 1.0);
        assert_eq!(n.qty_lost, 0);
    }
}

#[test]
fn orders_close_and_lead_times_hold() {
    let mut c = ScenarioConfig::reduced();
    c.run.run_length_days = 200;
    let mut m = supsim_core::model::SupplyChainModel::new(&c, 11, &SimOptions::default()).unwrap();
    let out = simulate(&c, 11, &SimOptions::default()).unwrap();
    assert!(!out.orders.is_empty());
    for o in &out.orders {
        assert_eq!(o.quantity_delivered + o.quantity_lost, o.quantity_requested);
        if let Some(at) = o.received_at {
            let lt = m.network.lead_time(o.requester, o.source, o.item).unwrap();
            assert_eq!(at - o.placed_at, 8.0 * lt as f64);
        }
    }
    for s in &out.stats {
        assert!(s.orders_fully_satisfied <= s.orders_received);
        assert!(s.total_quantity_lost <= s.total_quantity_ordered);
    }
    assert!(m.check_ledger().is_ok());
    assert!(m.check_balances().is_ok());
}

#[test]
fn warmup_restarts_statistics() {
    let mut c = ScenarioConfig::reduced();
    c.run.run_length_days = 100;
    let full = simulate(&c, 5, &SimOptions::default()).unwrap();
    c.run.warmup_days = 40;
    let warm = simulate(&c, 5, &SimOptions::default()).unwrap();
    let total = |o: &supsim_core::model::RunOutput| o.nodes.iter().map(|n| n.orders_received).sum::<u64>();
    assert!(total(&warm) < total(&full));
    assert!(total(&warm) > 0);
}

#[test]
fn malformed_config_is_rejected_before_running() {
    let mut c = ScenarioConfig::reduced();
    c.network.stores = 0;
    assert!(matches!(simulate(&c, 1, &SimOptions::default()), Err(SimError::Config(_))));
}

//! Per-round byte cost of every strategy for the two built-in presets and
//! for a desk-scale model.
//!
//! cargo run --example cost_table

use fedfeat::cost::CostModel;
use fedfeat::harness::cost_table;

fn main() -> fedfeat::Result<()> {
    for name in ["ucm", "aid"] {
        println!("preset {name}");
        println!("{}", cost_table(&CostModel::preset(name)?));
    }
    // an 8 → 64 → 32 → 16 MLP with a 10-class head, 700 training samples
    let w = 4 * ((8 * 64 + 64) + (64 * 32 + 32) + (32 * 16 + 16) + 10 * 16);
    println!("desk scale");
    print!("{}", cost_table(&CostModel::new(w, 16, 10, 10, 700)?));
    Ok(())
}

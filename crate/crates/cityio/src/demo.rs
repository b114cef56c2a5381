//! Scripted demo scenario and comment ingestion benchmark, both driven
//! through the public API.

use std::time::{Duration, Instant};

use cityio_core::feedback::{Anchor, RankedComment};
use cityio_core::history::Source;
use cityio_core::{cell_to_geo, Cell, CellEdit, Commit, GridState, Rotation, TableSpecDraft};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::client::{Client, ClientError};
use crate::wire::{GridPost, NewTable};

pub const DEMO_SIDE: u32 = 16;
pub const DEMO_COMMITS: usize = 30;
pub const DEMO_COMMENTS: usize = 200;

const PHRASES: [&str; 8] = [
    "more trees here please",
    "this block feels too dense",
    "love the new park",
    "road cuts the neighborhood in two",
    "could this be mixed use?",
    "great spot for a plaza",
    "too much shade in the afternoon",
    "keep the waterfront open",
];

#[derive(Debug)]
pub struct DemoReport {
    pub table: String,
    pub head: Commit,
    pub comments: usize,
    pub top: Option<RankedComment>,
}

fn demo_table(name: &str) -> NewTable {
    let mut d = TableSpecDraft::new(name, DEMO_SIDE, DEMO_SIDE);
    d.origin_lat = 42.5063;
    d.origin_lon = 1.5218;
    d.rotation_deg = 12.0;
    NewTable::from(d)
}

fn random_cell(rng: &mut ChaCha8Rng) -> Cell {
    let ty = rng.random_range(0..6u16);
    let rot = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270][rng.random_range(0..4)];
    let cell = Cell::of_type(ty).with_rotation(rot);
    match ty {
        1 | 2 if rng.random_bool(0.4) => cell.with_floors(rng.random_range(1..=20)),
        _ => cell,
    }
}

/// Creates table `name` and plays the demo scenario against it. The final
/// grid and the comment ranking depend only on `seed`.
pub async fn seed_demo(client: &Client, name: &str, seed: u64) -> Result<DemoReport, ClientError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genesis = client.create_table(&demo_table(name)).await?;
    let info = client.table(name).await?;
    let spec = info.spec;
    let n = spec.cell_count() as u32;
    let mut grid = genesis.grid.clone();
    let mut head = genesis;
    let mut comments = 0;
    for step in 0..DEMO_COMMITS {
        let count = rng.random_range(1..=12);
        let edits: Vec<CellEdit> = (0..count).map(|_| CellEdit::new(rng.random_range(0..n), random_cell(&mut rng))).collect();
        let mut next: GridState = grid.apply_edits(&spec, &edits).expect("demo edits are valid");
        if next == grid {
            // keep every step a real change
            let i = rng.random_range(0..n) as usize;
            let flipped = if next.cells()[i].type_id == 4 { Cell::of_type(3) } else { Cell::of_type(4) };
            next = next.apply_edits(&spec, &[CellEdit::new(i as u32, flipped)]).expect("valid edit");
        }
        let post = if step % 5 == 0 {
            GridPost::frame(next.clone()).by("table", Source::Table)
        } else {
            GridPost::edits(head.version, grid.diff(&next).expect("same size").iter().map(|d| d.edit()).collect())
                .by(&format!("designer-{}", rng.random_range(1..=4)), Source::Ui)
        };
        head = client.post_grid(name, &post).await?;
        grid = next;

        let due = (step + 1) * DEMO_COMMENTS / DEMO_COMMITS;
        while comments < due {
            let anchor = if rng.random_bool(0.7) {
                Anchor::Cell { col: rng.random_range(0..DEMO_SIDE), row: rng.random_range(0..DEMO_SIDE) }
            } else {
                let c = cell_to_geo(&spec, rng.random_range(0..DEMO_SIDE), rng.random_range(0..DEMO_SIDE)).expect("in bounds");
                Anchor::Geo { lat: c.lat + rng.random_range(-3e-5..3e-5), lon: c.lon + rng.random_range(-3e-5..3e-5) }
            };
            let text = format!("{} (#{})", PHRASES.choose(&mut rng).expect("non-empty"), comments + 1);
            let author = format!("visitor-{:02}", rng.random_range(1..=40));
            let c = client.add_comment(name, anchor, &text, &author).await?;
            comments += 1;
            let likes = rng.random_range(0..6);
            for _ in 0..likes {
                let who = format!("visitor-{:02}", rng.random_range(1..=40));
                client.react(name, c.id, &who).await?;
            }
            if rng.random_bool(0.2) && c.id > 1 {
                // an older comment gets a late like
                let id = rng.random_range(1..c.id);
                client.react(name, id, &format!("visitor-{:02}", rng.random_range(1..=40))).await?;
            }
        }
    }
    let top = client.top_comments(name, Some(1)).await?.into_iter().next();
    Ok(DemoReport { table: name.into(), head, comments, top })
}

#[derive(Debug)]
pub struct BenchReport {
    pub acked: usize,
    pub elapsed: Duration,
    pub first_id: Option<u64>,
    /// Ids formed one consecutive run.
    pub dense: bool,
}

impl BenchReport {
    pub fn per_second(&self) -> f64 {
        self.acked as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

/// Posts `n` comments to `table`, creating it if needed.
pub async fn bench_comments(client: &Client, table: &str, n: usize) -> Result<BenchReport, ClientError> {
    let spec = match client.table(table).await {
        Ok(info) => info.spec,
        Err(e) if e.status() == Some(404) => {
            client.create_table(&NewTable::new(table, DEMO_SIDE, DEMO_SIDE)).await?;
            client.table(table).await?.spec
        }
        Err(e) => return Err(e),
    };
    let start = Instant::now();
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let col = (i as u32) % spec.ncols();
        let row = (i as u32 / spec.ncols()) % spec.nrows();
        let c = client.add_comment(table, Anchor::Cell { col, row }, &format!("bench comment {}", i + 1), "bench").await?;
        ids.push(c.id);
    }
    let elapsed = start.elapsed();
    let dense = ids.windows(2).all(|w| w[1] == w[0] + 1);
    Ok(BenchReport { acked: ids.len(), elapsed, first_id: ids.first().copied(), dense })
}

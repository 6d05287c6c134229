//! Ad-serving simulation: scenarios, the slot engine, traffic and resource
//! accounting.

pub mod engine;
pub mod population;
pub mod resources;
pub mod scenario;
pub mod traffic;

pub use engine::{organic_world, run_simulation, OrganicSlot};
pub use population::{sample_population, AppSample, PopulationSummary, RateGroup};
pub use resources::{resource_accounting, ClassTable, ResourceReport, StorageTable};
pub use scenario::SimScenario;
pub use traffic::{ad_traffic, ad_traffic_volume, refresh_schedule, TrafficModel, TrafficTotals, MB};

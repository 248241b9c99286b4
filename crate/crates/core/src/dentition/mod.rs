//! Teeth, dentitions, FDI indexing, masking scenarios, augmentations,
//! synthetic generation and file I/O.

pub mod augment;
pub mod fdi;
pub mod io;
pub mod scenario;
pub mod synth;
pub mod tooth;

pub use augment::{augment, mirror_dentition, scale_dentition, shuffle_points, AugmentConfig};
pub use fdi::{zigzag_index, Arch, Fdi, ToothGroup, NUM_TEETH, ZIGZAG_ORDER};
pub use io::{read_dentition, read_ply, write_dentition, write_ply};
pub use scenario::{coverage_suite, Scenario, MAX_TARGETS};
pub use synth::{synth_dentition, SynthConfig};
pub use tooth::{Dentition, Frame, Role, Tooth};

//! Materials, conductor cross-sections, via detail levels and die stacks.

pub mod cross_section;
pub mod material;
pub mod stack;
pub mod via;

pub use cross_section::{
    build_cross_section, CrossSection, CrossSectionMask, MaskOptions, PlacedShape, Primitive,
};
pub use material::{Material, MaterialDb};
pub use stack::{
    assemble_stack, insert_thermal_vias, rotate_layer, BasicModule, DeviceSite, Diagnostic,
    Footprint, Interlayer, Layer, ModuleLibrary, Placement, StackModel,
};
pub use via::{via_detail_model, Sublayer, ViaGeometry, ViaParams, ViaSegment};

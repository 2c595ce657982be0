//! Synthetic phantoms and the CT measurement noise model.

mod noise;
mod phantom;

pub use noise::{add_noise, NoiseModel, RNG_NAME};
pub use phantom::{
    make_phantom, make_phantom_with_spacing, shepp_logan_2d_table, shepp_logan_3d_table, Ellipsoid, EllipsoidPhantom,
    PhantomKind,
};

#![allow(dead_code)]

use std::sync::Arc;
use std::thread;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use splatfill::{Camera, Gaussian3D, GaussianScene, ImageBuffer, Intrinsics, MaskBuffer, Pose};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(
        UnitQuaternion::from_euler_angles(
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-3.1..3.1),
            rng.gen_range(-0.3..0.3),
        ),
        Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ),
    )
}

pub fn random_camera(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Camera {
    let f = rng.gen_range(0.7..1.4) * w as f64;
    let k = Intrinsics::new(
        f,
        f * rng.gen_range(0.9..1.1),
        rng.gen_range(0.4..0.6) * w as f64,
        rng.gen_range(0.4..0.6) * h as f64,
        w,
        h,
    )
    .unwrap();
    Camera::new(k, random_pose(rng))
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Quaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if q.norm() > 0.1 {
            return q;
        }
    }
}

pub struct SceneSpec {
    pub max_gaussians: usize,
    pub opacity: (f64, f64),
    /// World-unit standard deviations.
    pub scale: (f64, f64),
    /// Fraction of Gaussians placed behind the camera.
    pub behind: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            max_gaussians: 50,
            opacity: (0.05, 0.99),
            scale: (0.01, 0.4),
            behind: 0.1,
        }
    }
}

/// Gaussians scattered through (and somewhat beyond) the camera frustum.
pub fn random_scene(rng: &mut ChaCha8Rng, cam: &Camera, spec: &SceneSpec) -> GaussianScene {
    let n = rng.gen_range(1..=spec.max_gaussians);
    let k = cam.intrinsics;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = if rng.gen_bool(spec.behind) {
            rng.gen_range(-3.0..-0.1)
        } else {
            rng.gen_range(0.5..6.0)
        };
        let spread_x = 0.7 * k.width as f64 / k.fx;
        let spread_y = 0.7 * k.height as f64 / k.fy;
        let p_cam = Vector3::new(
            rng.gen_range(-spread_x..spread_x) * z.abs(),
            rng.gen_range(-spread_y..spread_y) * z.abs(),
            z,
        );
        out.push(Gaussian3D::new(
            cam.pose.camera_to_world(&p_cam),
            random_rotation(rng),
            Vector3::new(
                rng.gen_range(spec.scale.0..spec.scale.1),
                rng.gen_range(spec.scale.0..spec.scale.1),
                rng.gen_range(spec.scale.0..spec.scale.1),
            ),
            rng.gen_range(spec.opacity.0..spec.opacity.1),
            [rng.gen(), rng.gen(), rng.gen()],
        ));
    }
    GaussianScene::from_gaussians(out, 0)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, |_, _| [rng.gen(), rng.gen(), rng.gen()])
}

pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> MaskBuffer {
    let p = rng.gen_range(0.0..1.0);
    MaskBuffer::from_fn(w, h, |_, _| rng.gen_bool(p))
}

pub type Handler = dyn Fn(&str, &[u8]) -> (u16, Vec<u8>) + Send + Sync;

/// Serves `handler(path, body)` on an ephemeral local port until the test
/// process exits. Returns the base URL.
pub fn stub_server(handler: Arc<Handler>) -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind stub server");
    let port = server.server_addr().to_ip().expect("ip listener").port();
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = Vec::new();
            let _ = req.as_reader().read_to_end(&mut body);
            let (status, reply) = handler(req.url(), &body);
            let _ = req.respond(tiny_http::Response::from_data(reply).with_status_code(status));
        }
    });
    format!("http://127.0.0.1:{port}")
}

/// A local URL nothing listens on.
pub fn dead_url() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    drop(l);
    format!("http://127.0.0.1:{port}")
}

pub fn json_body(body: &[u8]) -> serde_json::Value {
    serde_json::from_slice(body).expect("JSON request body")
}

/// Prints one acceptance line and fails the test when `ok` is false.
pub fn criterion(id: u32, name: &str, ok: bool, detail: impl AsRef<str>) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] AC-{id:02} {name}: {}", detail.as_ref());
    assert!(ok, "AC-{id:02} {name} failed: {}", detail.as_ref());
}

mod common;

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use common::{dead_url, json_body, stub_server};
use nalgebra::Vector3;
use serde_json::json;
use splatfill::backends::remote::{decode_b64, encode_b64};
use splatfill::backends::{
    InpainterBackend, PrompterBackend, ReconstructorBackend, RemoteEndpoint, DESCRIBE_INSTRUCTION,
};
use splatfill::geometry::yaw_pose;
use splatfill::io::png::{decode_mask, decode_rgb, encode_rgb};
use splatfill::io::ply::encode_ply;
use splatfill::{Camera, Error, Gaussian3D, GaussianScene, ImageBuffer, Intrinsics, MaskBuffer, Pose};

fn img() -> ImageBuffer {
    ImageBuffer::from_fn(10, 6, |x, y| [x as f64 / 10.0, y as f64 / 6.0, 0.25])
}

fn endpoint(url: String) -> RemoteEndpoint {
    RemoteEndpoint::new(url).with_timeout(5.0)
}

#[test]
fn inpaint_request_and_merge() {
    let seen = Arc::new(Mutex::new(None));
    let log = seen.clone();
    let url = stub_server(Arc::new(move |path, body| {
        let v = json_body(body);
        *log.lock().unwrap() = Some((path.to_string(), v.clone()));
        let out = ImageBuffer::filled(10, 6, [1.0, 0.0, 1.0]);
        (200, json!({ "image": encode_b64(&encode_rgb(&out).unwrap()) }).to_string().into_bytes())
    }));
    let mask = MaskBuffer::from_fn(10, 6, |x, y| x + y < 7);
    let out = InpainterBackend::Remote(endpoint(url))
        .inpaint(&img(), &mask, "a red wall", 2)
        .unwrap();

    let (path, v) = seen.lock().unwrap().take().unwrap();
    assert_eq!(path, "/v1/inpaint");
    assert_eq!(v["prompt"], "a red wall");
    let sent_mask = decode_mask(&decode_b64(v["mask"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(sent_mask, mask);
    let sent = decode_rgb(&decode_b64(v["image"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(sent.dims(), (10, 6));

    for y in 0..6 {
        for x in 0..10 {
            let want = if mask.get(x, y) { img().pixel(x, y) } else { [1.0, 0.0, 1.0] };
            assert_eq!(out.pixel(x, y), want);
        }
    }
}

#[test]
fn inpaint_failures_are_backend_errors() {
    let mask = MaskBuffer::filled(10, 6, false);
    let cases: Vec<(u16, Vec<u8>)> = vec![
        (500, b"model crashed".to_vec()),
        (200, b"not json".to_vec()),
        (200, json!({"image": "!!!"}).to_string().into_bytes()),
        // wrong size
        (200, json!({"image": encode_b64(&encode_rgb(&ImageBuffer::filled(3, 3, [0.0; 3])).unwrap())}).to_string().into_bytes()),
    ];
    for (status, reply) in cases {
        let url = stub_server(Arc::new(move |_, _| (status, reply.clone())));
        let err = InpainterBackend::Remote(endpoint(url))
            .inpaint(&img(), &mask, "p", 1)
            .unwrap_err();
        assert!(matches!(err, Error::BackendUnavailable { .. }), "{err:?}");
    }
}

#[test]
fn describe_sends_fixed_instruction() {
    let url = stub_server(Arc::new(|path, body| {
        let v = json_body(body);
        assert_eq!(path, "/v1/describe");
        let text = if v["instruction"] == DESCRIBE_INSTRUCTION { "A bright hallway." } else { "?" };
        (200, json!({ "text": text }).to_string().into_bytes())
    }));
    let text = PrompterBackend::Remote(endpoint(url)).describe(&img()).unwrap();
    assert_eq!(text, "A bright hallway.");
}

#[test]
fn reconstruct_moves_camera_frame_output_to_world() {
    // the service answers with one Gaussian 2 units in front of the camera
    let local = GaussianScene::from_gaussians(
        vec![Gaussian3D::isotropic(Vector3::new(0.0, 0.0, 2.0), 0.1, 0.8, [0.2, 0.4, 0.6])],
        0,
    );
    let ply = encode_ply(&local);
    let url = stub_server(Arc::new(move |path, body| {
        assert_eq!(path, "/v1/reconstruct");
        assert!(json_body(body)["image"].is_string());
        (200, ply.clone())
    }));
    let k = Intrinsics::from_fov(10, 6, 60.0).unwrap();
    let cam = Camera::new(k, yaw_pose(&Pose::identity(), 90.0).unwrap());
    let scene = ReconstructorBackend::Remote(endpoint(url))
        .reconstruct(&img(), &cam, None, 1.5)
        .unwrap();
    assert_eq!(scene.len(), 1);
    let g = &scene.gaussians()[0];
    // yawed 90° toward +x, rescaled by 1.5
    assert!((g.mean - Vector3::new(3.0, 0.0, 0.0)).norm() < 1e-6, "{:?}", g.mean);
    assert!((g.scale.x - 0.15).abs() < 1e-6);
}

#[test]
fn reconstruct_rejects_garbage_ply() {
    let url = stub_server(Arc::new(|_, _| (200, b"ply\nformat nonsense\n".to_vec())));
    let err = ReconstructorBackend::Remote(endpoint(url))
        .reconstruct(&img(), &Camera::new(Intrinsics::from_fov(10, 6, 60.0).unwrap(), Pose::identity()), None, 1.0)
        .unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable { .. }), "{err:?}");
}

#[test]
fn unreachable_endpoint_fails_fast() {
    let start = Instant::now();
    let err = PrompterBackend::Remote(endpoint(dead_url())).describe(&img()).unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable { .. }));
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn slow_service_times_out() {
    let url = stub_server(Arc::new(|_, _| {
        std::thread::sleep(Duration::from_secs(3));
        (200, json!({"text": "late"}).to_string().into_bytes())
    }));
    let start = Instant::now();
    let err = PrompterBackend::Remote(RemoteEndpoint::new(url).with_timeout(0.5))
        .describe(&img())
        .unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable { .. }), "{err:?}");
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn bad_endpoint_config_is_invalid_argument() {
    for ep in [RemoteEndpoint::new("not a url"), RemoteEndpoint::new("http://x").with_timeout(0.0)] {
        assert!(matches!(
            InpainterBackend::Remote(ep).validate(),
            Err(Error::InvalidArgument(_))
        ));
    }
}

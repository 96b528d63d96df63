use sap_core::apps::xfer::{xfer_fetch, Delivery, MemoryStore, XferRequest, CHUNK};
use sap_core::apps::AppError;
use sap_core::channel::ChannelParams;
use sap_core::sap::{MsgType, World};

fn body(n: usize) -> Vec<u8> {
    (0..n).map(|i| (i * 7 + i / 251) as u8).collect()
}

fn setup(channel: ChannelParams) -> (World, MemoryStore) {
    let mut store = MemoryStore::new();
    store.insert("/photo.jpg", body(10 * CHUNK + 100));
    store.insert("/index.html", body(3000));
    (World::new(&channel, 54.0, 8.0), store)
}

#[test]
fn approximate_image_over_quiet_channel_is_exact() {
    let (mut w, store) = setup(ChannelParams::noiseless(0));
    let (c, s) = (w.add_station(true), w.add_station(true));
    let out = xfer_fetch(&mut w, c, s, &store, &XferRequest::approximate("/photo.jpg", &["image/jpeg"], 9000)).unwrap();
    assert_eq!(out.delivery, Delivery::Approximate);
    assert_eq!(out.body, body(10 * CHUNK + 100));
    assert_eq!(out.missing_chunks, 0);
    // status line plus eleven chunks
    assert_eq!(out.data_on_air, 12);
    assert!(out.transfer_time_us > 0);
}

#[test]
fn unlisted_type_goes_in_band() {
    let (mut w, store) = setup(ChannelParams::noiseless(0));
    let (c, s) = (w.add_station(true), w.add_station(true));
    let out = xfer_fetch(&mut w, c, s, &store, &XferRequest::approximate("/index.html", &["image/jpeg"], 9000)).unwrap();
    assert_eq!(out.delivery, Delivery::InBand);
    assert_eq!(out.body, body(3000));
}

#[test]
fn forced_precise_uses_sap_connection() {
    let (mut w, store) = setup(ChannelParams::uniform(2e-5, 0.02, 4).unwrap());
    let (c, s) = (w.add_station(false), w.add_station(false));
    let req = XferRequest { force_precise: true, sap_port: Some(9000), ..XferRequest::plain("/photo.jpg") };
    let out = xfer_fetch(&mut w, c, s, &store, &req).unwrap();
    assert_eq!(out.delivery, Delivery::PreciseSap);
    assert_eq!(out.body, body(10 * CHUNK + 100));
}

#[test]
fn missing_file_is_not_found() {
    let (mut w, store) = setup(ChannelParams::noiseless(0));
    let (c, s) = (w.add_station(true), w.add_station(true));
    let err = xfer_fetch(&mut w, c, s, &store, &XferRequest::plain("/nope.jpg")).unwrap_err();
    assert_eq!(err, AppError::NotFound("/nope.jpg".into()));
}

#[test]
fn noisy_approximate_transfer_keeps_length_and_never_retransmits() {
    let (mut w, store) = setup(ChannelParams::uniform(1e-4, 0.1, 12).unwrap());
    let (c, s) = (w.add_station(true), w.add_station(true));
    let before = w.stats().on_air(MsgType::Data);
    let out = xfer_fetch(&mut w, c, s, &store, &XferRequest::approximate("/photo.jpg", &["image/jpeg"], 9000)).unwrap();
    assert_eq!(out.body.len(), 10 * CHUNK + 100);
    assert!(out.missing_chunks <= 11);
    assert!(w.stats().on_air(MsgType::Data) - before >= 11);
}

"""Smoke tests for the compiled bindings."""

import _edgecast as ec


def test_detection_lookup_matches_published_values():
    table = ec.DetectionTable.builtin()
    assert ec.detection_lookup(2.0, ec.DropStrategy.Uniform, table) == 0.46
    assert ec.detection_lookup(2.0, ec.DropStrategy.Differential, table) == 0.74
    mid = ec.detection_lookup(1.5, ec.DropStrategy.Differential, table)
    assert abs(mid - 0.85) < 1e-12


def test_max_tolerable_loss_inverts_the_table():
    table = ec.DetectionTable.builtin()
    loss = ec.max_tolerable_loss(0.96, ec.DropStrategy.Differential, table)
    assert abs(loss - 1.0) < 1e-9


def test_synthetic_stream_parses_and_classifies():
    payload = ec.generate_synthetic(gop=12, packets_per_frame=3, num_frames=24)
    assert len(payload) % 188 == 0
    packets = ec.scan_datagram(payload[: 188 * 7])
    assert len(packets) == 7
    assert packets[0].pid == 0

    classes = ec.classify_stream(payload, 0x0100)
    counts = {}
    for cls in classes:
        counts[cls] = counts.get(cls, 0) + 1
    assert counts[ec.FrameClass.NonVideo] == 2
    assert counts[ec.FrameClass.Reference] == 6
    assert counts[ec.FrameClass.Differential] == 66


def test_bandwidth_math_on_the_desk_instance():
    rates = [(1.2e6, 4.8e6), (1.2e6, 4.8e6)]
    assert abs(ec.bandwidth_full(rates, 3) - 36e6) < 1e-9
    assert abs(ec.bandwidth_saved(rates, [0.5, 0.5]) - 4.8e6) < 1e-9
    assert ec.effective_quality([0.5, 0.9]) == 0.9


def test_solver_produces_residual_deltas():
    omega, q_eff, delta = ec.solve_min_bandwidth(
        {(0, 0): 0.96, (0, 1): 0.74}, ec.DropStrategy.Differential, 1, 2
    )
    assert abs(omega[(0, 0)] - 0.99) < 1e-9
    assert abs(omega[(0, 1)] - 0.98) < 1e-9
    assert abs(q_eff[0] - 0.99) < 1e-9
    assert abs(delta[(0, 1)] - (1.0 - 0.98 / 0.99)) < 1e-9


def test_strategy_comparison_direction():
    uniform, selective = ec.compare_strategies(
        12, 3, 12 * 30, 0.02, [1, 2, 3, 4, 5]
    )
    assert selective > uniform


def test_control_codec_round_trip():
    raw = ec.encode_quality_notify(3, 1.0)
    assert raw == bytes([0x45, 0x43, 0x01, 0x01, 0x03, 0x00, 0xFF, 0xFF])
    stream_id, keep = ec.decode_quality_notify(raw)
    assert stream_id == 3
    assert keep == 1.0

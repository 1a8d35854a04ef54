"""Shared test utilities: finite-difference gradient oracle, byte fixtures
for the binary dataset formats, and a pass-through network builder."""

import struct

import numpy as np

from lrtnet.network import NetParams, forward


def fd_gradient(params, x, omega, step=1e-5):
    """Central-difference gradient of omega(z(theta)) over every parameter.

    Returns (gA, ga, gB, gb) arrays shaped like the parameters.  This is the
    independent oracle for the closed-form gradient; it never calls it.
    """

    def y_of(p):
        return forward(p, x, omega).y

    gA = np.zeros_like(params.A)
    for idx in np.ndindex(*params.A.shape):
        for sign in (1.0, -1.0):
            p = params.copy()
            p.A[idx] += sign * step
            gA[idx] += sign * y_of(p)
    gA /= 2 * step

    ga = np.zeros_like(params.a)
    for i in range(len(params.a)):
        for sign in (1.0, -1.0):
            p = params.copy()
            p.a[i] += sign * step
            ga[i] += sign * y_of(p)
    ga /= 2 * step

    gB = np.zeros_like(params.B)
    for i in range(len(params.B)):
        for sign in (1.0, -1.0):
            p = params.copy()
            p.B[i] += sign * step
            gB[i] += sign * y_of(p)
    gB /= 2 * step

    plus, minus = params.copy(), params.copy()
    plus.b += step
    minus.b -= step
    gb = (y_of(plus) - y_of(minus)) / (2 * step)
    return gA, ga, gB, gb


def assert_gradients_close(analytic, numeric, rtol=1e-4, floor=1e-3):
    """Per-entry |a - n| <= rtol * max(|a|, |n|, floor)."""
    for a, n in zip(analytic, numeric):
        a, n = np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(n, float))
        scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = np.max(np.abs(a - n) / scale)
        assert worst < rtol, f"gradient mismatch, worst relative error {worst:.3e}"


def draw_clear_config(rng, omega, n=3, k=2, kink_clearance=1e-3, max_tries=200):
    """Random (params, x) whose hidden pre-activations and output stay clear
    of ReLU kinks and declared slow-difference points of the output map."""
    avoid = omega.source.nonsmooth_points
    for _ in range(max_tries):
        params = NetParams(
            rng.normal(size=(n, k)), rng.normal(size=n), rng.normal(size=n),
            float(rng.normal()),
        )
        x = rng.normal(size=k)
        trace = forward(params, x, omega)
        if np.min(np.abs(trace.U)) <= kink_clearance:
            continue
        if any(abs(trace.z - p) <= kink_clearance for p in avoid):
            continue
        return params, x
    raise RuntimeError("could not draw a kink-clear configuration")


def make_passthrough_params(scale=1.0):
    """1-input network computing z = scale * x via two ReLU branches."""
    return NetParams(
        A=np.array([[1.0], [-1.0]]),
        a=np.zeros(2),
        B=np.array([scale, -scale]),
        b=0.0,
    )


def idx_images_bytes(arrays, magic=0x00000803):
    """IDX image payload for a list of 2-D uint8 arrays."""
    arrays = [np.asarray(a, dtype=np.uint8) for a in arrays]
    rows, cols = arrays[0].shape
    head = struct.pack(">IIII", magic, len(arrays), rows, cols)
    return head + b"".join(a.tobytes() for a in arrays)


def idx_labels_bytes(labels, magic=0x00000801):
    head = struct.pack(">II", magic, len(labels))
    return head + bytes(labels)


def cifar_record(label, pixels):
    """One 3073-byte CIFAR record from a label and 3072 pixel values."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    assert pixels.size == 3072
    return bytes([label]) + pixels.tobytes()

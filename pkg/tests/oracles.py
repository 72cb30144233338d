"""Plain numpy compositions of the graph modules and networks, used as references."""

import numpy as np
from scipy.special import softmax


def numpy_gsm(F: np.ndarray, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z_g, θ_g and the reweighted map of the global structure module."""
    c = F.shape[0]
    X = np.einsum("cn,cnd->cd", F.reshape(c, -1), p.omega.data)
    A = p.A_low.data
    Z_low = np.maximum(A @ X @ p.W_low.data, 0)
    C_agg = softmax(A @ X @ p.V_low.data, axis=1)
    X_high, A_high = C_agg.T @ X, C_agg.T @ A @ C_agg
    Z_high = np.maximum(A_high @ X_high @ p.W_high.data, 0)
    C_dec = softmax(A_high @ X_high @ p.V_high.data, axis=1)
    Z_g = C_dec.T @ Z_high + Z_low
    theta = softmax(Z_g.mean(axis=1))
    if p.rescale_by_c:
        theta = theta * c
    return Z_g, theta, theta[:, None, None] * F


def numpy_lcm(
    F: np.ndarray, p, Z_g: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z_l, θ_l and the reweighted map of the local consistency module."""
    X = p.omega_l1.data @ F.reshape(F.shape[0], -1) @ p.omega_l2.data
    A = softmax(X @ X.T, axis=1)
    Z_l = np.maximum(A @ X @ p.W_l.data, 0)
    Z = Z_l if Z_g is None else Z_l + p.alpha * Z_g
    theta = softmax(Z.mean(axis=1))
    lifted = theta if p.lift == "identity" else p.omega_l1.data.T @ theta
    return Z_l, theta, lifted[:, None, None] * F


def numpy_conv(x: np.ndarray, layer) -> np.ndarray:
    kernel, s = layer.kernel.data, layer.stride
    _, h, w = x.shape
    ho, wo = -(-h // s), -(-w // s)
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((kernel.shape[0], ho, wo))
    for ky in range(3):
        for kx in range(3):
            window = padded[:, ky : ky + s * ho : s, kx : kx + s * wo : s]
            out += np.einsum("oi,iyx->oyx", kernel[:, :, ky, kx], window)
    out += layer.bias.data[:, None, None]
    return np.maximum(out, 0) if layer.relu else out


def numpy_stack(layers, x: np.ndarray) -> np.ndarray:
    for layer in layers:
        x = numpy_conv(x, layer)
    return x


def numpy_head(head, x: np.ndarray) -> np.ndarray:
    return np.einsum("oi,iyx->oyx", head.weight.data, x) + head.bias.data[:, None, None]


def numpy_decode(layers, x: np.ndarray) -> np.ndarray:
    for layer in layers:
        x = numpy_conv(x.repeat(2, axis=1).repeat(2, axis=2), layer)
    return x


def numpy_segnet(image: np.ndarray, p) -> np.ndarray:
    F = numpy_stack(p.encoder, image)
    if p.lcm is not None:
        F = numpy_lcm(F, p.lcm)[2]
    F_head = numpy_head(p.head, F)
    if p.gsm is not None:
        F_head = numpy_gsm(F_head, p.gsm)[2]
    return numpy_decode(p.decoder, F_head)


def numpy_rectnet(x: np.ndarray, p) -> np.ndarray:
    """R-Net logits with both modules and the two-pass assistance."""
    F = numpy_stack(p.backbone, x)
    F_local = numpy_lcm(F, p.lcm)[2]
    Z_g, _, _ = numpy_gsm(numpy_stack(p.phi, F_local), p.gsm)
    _, _, F_local = numpy_lcm(F, p.lcm, Z_g)
    _, _, F_global = numpy_gsm(numpy_stack(p.phi, F_local), p.gsm)
    return numpy_decode(p.decoder, numpy_head(p.head, F_global))

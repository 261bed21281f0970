"""
SAIM Scanner
Convolutional state-space recurrence that scans an image into gradient fields
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

logger = logging.getLogger(__name__)

KERNEL_SIZE = 3
STATE_SIZE = KERNEL_SIZE + 2
TILE_SIZE = 2 * KERNEL_SIZE + 1
TILE_RADIUS = KERNEL_SIZE

BORDER_POLICIES = ('reflect', 'zero')
FUSION_MODES = ('max_magnitude', 'average')
FLIPS = ('horizontal', 'vertical')
AXES = ('x', 'y')

# (grid, kernel) -> valid correlation of grid with kernel
Convolver = Callable[[np.ndarray, np.ndarray], np.ndarray]
# kernel -> kernel as actually realised by the convolution backend
KernelProgrammer = Callable[[np.ndarray], np.ndarray]


def as_kernel3(values) -> np.ndarray:
    """Coerce values to a float 3x3 kernel"""
    kernel = np.asarray(values, dtype=np.float64)
    if kernel.shape != (KERNEL_SIZE, KERNEL_SIZE):
        raise ValueError(f"Kernel must be 3x3, got shape {kernel.shape}")
    return kernel


@dataclass(eq=False)
class KernelSet:
    """The eight 3x3 kernels of the recurrence plus the B-kernel parameter v"""

    a_x: np.ndarray
    a_y: np.ndarray
    b_x: np.ndarray
    b_y: np.ndarray
    c_x: np.ndarray
    c_y: np.ndarray
    d_x: np.ndarray
    d_y: np.ndarray
    v: float = 1.3
    variant: str = 'standard'

    def __post_init__(self):
        for name in ('a_x', 'a_y', 'b_x', 'b_y', 'c_x', 'c_y', 'd_x', 'd_y'):
            setattr(self, name, as_kernel3(getattr(self, name)))

    def family(self, axis: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return the (A, B, C, D) kernels driving one axis"""
        if axis == 'x':
            return self.a_x, self.b_x, self.c_x, self.d_x
        if axis == 'y':
            return self.a_y, self.b_y, self.c_y, self.d_y
        raise ValueError(f"Unknown axis: {axis!r} (expected one of {AXES})")

    def to_dict(self) -> Dict:
        return {'v': self.v, 'variant': self.variant}


def build_kernel_set(v: float = 1.3) -> KernelSet:
    """
    Build the fixed kernel set

    Args:
        v: Parameter of the B kernels

    Returns:
        KernelSet with A symmetric, B built from v, C = D = Sobel
    """
    if not np.isfinite(v):
        raise ValueError(f"v must be finite, got {v}")

    a_x = np.array([
        [-1.0, -0.5, 0.0],
        [-0.5, 0.0, -0.5],
        [0.0, -0.5, -1.0],
    ])
    outer = v - v * v
    b_x = np.array([
        [outer, 2 * v, -1.0],
        [outer, 2 * v, -2.0],
        [outer, 2 * v, -1.0],
    ])
    d_x = np.array([
        [-1.0, 0.0, 1.0],
        [-2.0, 0.0, 2.0],
        [-1.0, 0.0, 1.0],
    ])

    return KernelSet(
        a_x=a_x, a_y=a_x.T.copy(),
        b_x=b_x, b_y=b_x.T.copy(),
        c_x=d_x.copy(), c_y=d_x.T.copy(),
        d_x=d_x, d_y=d_x.T.copy(),
        v=float(v),
    )


def degenerate_kernel_set(kernels: Optional[KernelSet] = None) -> KernelSet:
    """Zero A, B and C so the scanner collapses to a fixed D filter"""
    kernels = kernels or build_kernel_set()
    zero = np.zeros((KERNEL_SIZE, KERNEL_SIZE))
    return KernelSet(
        a_x=zero, a_y=zero, b_x=zero, b_y=zero, c_x=zero, c_y=zero,
        d_x=kernels.d_x.copy(), d_y=kernels.d_y.copy(),
        v=kernels.v, variant='zero',
    )


def kernel_set_from_dict(data: Dict) -> KernelSet:
    kernels = build_kernel_set(float(data.get('v', 1.3)))
    variant = data.get('variant', 'standard')
    if variant == 'zero':
        return degenerate_kernel_set(kernels)
    if variant != 'standard':
        raise ValueError(f"Unknown kernel variant: {variant!r}")
    return kernels


@dataclass
class SaimWeights:
    """Scalar weights a, b, c, d of the recurrence"""

    a: float = 0.8
    b: float = 1.0
    c: float = 0.8
    d: float = 1.0

    def __post_init__(self):
        for name in ('a', 'b', 'c', 'd'):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 2.0:
                raise ValueError(f"Weight {name}={value} outside [0, 2]")
            setattr(self, name, value)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.a, self.b, self.c, self.d

    def to_dict(self) -> Dict:
        return {'a': self.a, 'b': self.b, 'c': self.c, 'd': self.d}


@dataclass
class ScanConfig:
    """How an image is scanned into a gradient field"""

    weights: SaimWeights = field(default_factory=SaimWeights)
    kernels: KernelSet = field(default_factory=build_kernel_set)
    flips: Tuple[str, ...] = ()
    border_policy: str = 'reflect'
    fusion: str = 'max_magnitude'
    # Bound on the spectral radius of the state transition; None runs the raw recurrence
    state_radius: Optional[float] = 0.9

    def __post_init__(self):
        flips = tuple(self.flips)
        unknown = [f for f in flips if f not in FLIPS]
        if unknown:
            raise ValueError(f"Unknown flips: {unknown} (expected members of {FLIPS})")
        if len(set(flips)) != len(flips) or len(flips) > 2:
            raise ValueError(f"Flips must be a set of at most two members, got {flips}")
        self.flips = tuple(sorted(flips))

        if self.border_policy not in BORDER_POLICIES:
            raise ValueError(f"Unknown border policy: {self.border_policy!r}")
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"Unknown fusion mode: {self.fusion!r}")
        if self.state_radius is not None and self.state_radius <= 0:
            raise ValueError(f"state_radius must be positive, got {self.state_radius}")

    def to_dict(self) -> Dict:
        return {
            'weights': self.weights.to_dict(),
            'kernels': self.kernels.to_dict(),
            'flips': list(self.flips),
            'border_policy': self.border_policy,
            'fusion': self.fusion,
            'state_radius': self.state_radius,
        }


@dataclass
class GradientField:
    """Per-pixel horizontal and vertical responses"""

    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        self.gx = np.asarray(self.gx, dtype=np.float64)
        self.gy = np.asarray(self.gy, dtype=np.float64)
        if self.gx.shape != self.gy.shape:
            raise ValueError(f"gx shape {self.gx.shape} != gy shape {self.gy.shape}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.gx.shape


def zero_pad(grid: np.ndarray, target: Tuple[int, int]) -> np.ndarray:
    """Center grid in a zero field of the target size"""
    grid = np.asarray(grid, dtype=np.float64)
    rows, cols = target
    pad_rows = rows - grid.shape[0]
    pad_cols = cols - grid.shape[1]

    if pad_rows < 0 or pad_cols < 0:
        raise ValueError(f"Cannot pad {grid.shape} down to {target}")
    if pad_rows % 2 or pad_cols % 2:
        raise ValueError(f"Asymmetric pad from {grid.shape} to {target}")

    return np.pad(grid, ((pad_rows // 2, pad_rows // 2), (pad_cols // 2, pad_cols // 2)))


def valid_convolve(grid: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """
    Valid 3x3 cross-correlation over the last two axes

    Leading axes are treated as a batch.

    Args:
        grid: Array of shape (..., rows, cols) with rows, cols >= 3
        kernel: 3x3 kernel

    Returns:
        Array of shape (..., rows - 2, cols - 2)
    """
    grid = np.asarray(grid, dtype=np.float64)
    kernel = as_kernel3(kernel)

    if grid.ndim < 2 or grid.shape[-2] < KERNEL_SIZE or grid.shape[-1] < KERNEL_SIZE:
        raise ValueError(f"Input of shape {grid.shape} is smaller than the 3x3 kernel")

    windows = sliding_window_view(grid, (KERNEL_SIZE, KERNEL_SIZE), axis=(-2, -1))
    return np.einsum('...ijkl,kl->...ij', windows, kernel)


def center_sample(grid: np.ndarray) -> float:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape != (KERNEL_SIZE, KERNEL_SIZE):
        raise ValueError(f"center_sample expects a 3x3 grid, got {grid.shape}")
    return float(grid[1, 1])


def saim_step(state: np.ndarray, tile: np.ndarray, weights: SaimWeights,
              kernels: KernelSet, axis: str) -> Tuple[float, np.ndarray]:
    """
    Advance one axis chain by one pixel

    Args:
        state: 5x5 state carried from the previous pixel
        tile: 7x7 neighbourhood of the current pixel
        weights: Recurrence weights
        kernels: Kernel set
        axis: 'x' or 'y'

    Returns:
        (output value, next 5x5 state)
    """
    state = np.asarray(state, dtype=np.float64)
    tile = np.asarray(tile, dtype=np.float64)
    if state.shape != (STATE_SIZE, STATE_SIZE):
        raise ValueError(f"State must be 5x5, got {state.shape}")
    if tile.shape != (TILE_SIZE, TILE_SIZE):
        raise ValueError(f"Tile must be 7x7, got {tile.shape}")

    a_k, b_k, c_k, d_k = kernels.family(axis)

    x_bar = (weights.a * valid_convolve(zero_pad(state, (TILE_SIZE, TILE_SIZE)), a_k)
             + weights.b * valid_convolve(tile, b_k))
    core = tile[2:5, 2:5]
    y = center_sample(valid_convolve(x_bar, c_k)) + float(valid_convolve(core, d_k)[0, 0])
    next_state = weights.c * x_bar + weights.d * valid_convolve(tile, d_k)

    return y, next_state


def pad_image(image: np.ndarray, border_policy: str = 'reflect') -> np.ndarray:
    """Pad by the tile radius on every side"""
    if border_policy == 'reflect':
        return np.pad(image, TILE_RADIUS, mode='reflect')
    if border_policy == 'zero':
        return np.pad(image, TILE_RADIUS, mode='constant')
    raise ValueError(f"Unknown border policy: {border_policy!r}")


def extract_tile(image: np.ndarray, row: int, col: int, border_policy: str = 'reflect') -> np.ndarray:
    """7x7 neighbourhood centred at (row, col)"""
    image = np.asarray(image, dtype=np.float64)
    rows, cols = image.shape
    if not (0 <= row < rows and 0 <= col < cols):
        raise ValueError(f"Pixel ({row}, {col}) outside image of shape {image.shape}")

    padded = pad_image(image, border_policy)
    return padded[row:row + TILE_SIZE, col:col + TILE_SIZE].copy()


def state_operator(a_kernel: np.ndarray) -> np.ndarray:
    """25x25 matrix of the map state -> valid_convolve(zero_pad(state, 7x7), A)"""
    size = STATE_SIZE * STATE_SIZE
    basis = np.eye(size).reshape(size, STATE_SIZE, STATE_SIZE)
    responses = valid_convolve(np.pad(basis, ((0, 0), (1, 1), (1, 1))), a_kernel)
    return responses.reshape(size, size).T


def effective_weights(config: ScanConfig, programmer: Optional[KernelProgrammer] = None) -> SaimWeights:
    """
    Weights actually used by scan_image

    When the spectral radius of the state transition a*c*M_A exceeds
    config.state_radius, a is scaled down so the radius equals the bound.
    """
    weights = config.weights
    if config.state_radius is None:
        return weights

    radius = 0.0
    for axis in AXES:
        a_k = config.kernels.family(axis)[0]
        if programmer is not None:
            a_k = programmer(a_k)
        transition = weights.a * weights.c * state_operator(a_k)
        radius = max(radius, float(np.max(np.abs(np.linalg.eigvals(transition)))))

    if radius <= config.state_radius:
        return weights

    scale = config.state_radius / radius
    logger.debug(f"State transition radius {radius:.4f} > {config.state_radius}; "
                 f"a scaled {weights.a} -> {weights.a * scale:.6f}")
    return replace(weights, a=weights.a * scale)


def _run_chain(b_full: np.ndarray, d_full: np.ndarray, operator: np.ndarray,
               c_kernel: np.ndarray, weights: SaimWeights, shape: Tuple[int, int]) -> np.ndarray:
    rows, cols = shape
    count = rows * cols
    window = (STATE_SIZE, STATE_SIZE)

    # Per-pixel 5x5 blocks of the image-level B and D responses, raster order
    b_blocks = sliding_window_view(b_full, window).reshape(count, -1)
    d_blocks = sliding_window_view(d_full, window).reshape(count, -1)
    d_center = d_full[2:2 + rows, 2:2 + cols].reshape(count)

    readout = np.zeros(window)
    readout[1:4, 1:4] = c_kernel
    readout = readout.ravel()

    transition = weights.a * operator
    if not np.any(transition):
        # State never feeds back: every pixel is independent
        return (weights.b * (b_blocks @ readout) + d_center).reshape(rows, cols)

    out = np.empty(count)
    state = np.zeros(STATE_SIZE * STATE_SIZE)
    for k in range(count):
        x_bar = transition @ state + weights.b * b_blocks[k]
        out[k] = readout @ x_bar + d_center[k]
        state = weights.c * x_bar + weights.d * d_blocks[k]

    return out.reshape(rows, cols)


def scan_image(image: np.ndarray, config: ScanConfig,
               convolver: Optional[Convolver] = None,
               programmer: Optional[KernelProgrammer] = None) -> GradientField:
    """
    Scan an image in raster order with one state chain per axis

    Args:
        image: 2-D grayscale image
        config: Scan configuration
        convolver: Backend for the image-level B and D correlations
        programmer: Backend realisation of the state-path A and C kernels

    Returns:
        GradientField of the same shape as image
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ValueError(f"Expected a non-empty 2-D image, got shape {image.shape}")

    convolve = convolver or valid_convolve
    weights = effective_weights(config, programmer)
    padded = pad_image(image, config.border_policy)

    outputs = {}
    for axis in AXES:
        a_k, b_k, c_k, d_k = config.kernels.family(axis)
        if programmer is not None:
            a_k, c_k = programmer(a_k), programmer(c_k)

        outputs[axis] = _run_chain(
            convolve(padded, b_k),
            convolve(padded, d_k),
            state_operator(a_k),
            c_k,
            weights,
            image.shape,
        )

    return GradientField(gx=outputs['x'], gy=outputs['y'])


def flip_image(image: np.ndarray, flip: str) -> np.ndarray:
    if flip == 'horizontal':
        return image[:, ::-1]
    if flip == 'vertical':
        return image[::-1, :]
    raise ValueError(f"Unknown flip: {flip!r}")


def unflip_field(field: GradientField, flip: str) -> GradientField:
    """Map a field scanned on a flipped image back onto the original grid"""
    if flip == 'horizontal':
        return GradientField(gx=-field.gx[:, ::-1], gy=field.gy[:, ::-1])
    if flip == 'vertical':
        return GradientField(gx=field.gx[::-1, :], gy=-field.gy[::-1, :])
    raise ValueError(f"Unknown flip: {flip!r}")


def fuse_scans(base: GradientField, flipped: Sequence[Tuple[str, GradientField]],
               mode: str = 'max_magnitude') -> GradientField:
    """
    Combine the base field with corrected flipped-scan fields

    Args:
        base: Field of the unflipped scan
        flipped: (flip, field) pairs already mapped back with unflip_field
        mode: 'max_magnitude' keeps the strongest pair, 'average' averages components

    Returns:
        Fused GradientField
    """
    fields: List[GradientField] = [base] + [f for _, f in flipped]
    for flip, f in flipped:
        if f.shape != base.shape:
            raise ValueError(f"Field for flip {flip!r} has shape {f.shape}, expected {base.shape}")

    gx = np.stack([f.gx for f in fields])
    gy = np.stack([f.gy for f in fields])

    if mode == 'average':
        return GradientField(gx=gx.mean(axis=0), gy=gy.mean(axis=0))
    if mode == 'max_magnitude':
        # argmax returns the first maximum, so the base field wins ties
        pick = np.argmax(gx ** 2 + gy ** 2, axis=0)[np.newaxis]
        return GradientField(
            gx=np.take_along_axis(gx, pick, axis=0)[0],
            gy=np.take_along_axis(gy, pick, axis=0)[0],
        )
    raise ValueError(f"Unknown fusion mode: {mode!r}")


def scan_with_flips(image: np.ndarray, config: ScanConfig,
                    convolver: Optional[Convolver] = None,
                    programmer: Optional[KernelProgrammer] = None) -> GradientField:
    """Base scan plus one scan per configured flip, fused"""
    base = scan_image(image, config, convolver, programmer)
    if not config.flips:
        return base

    image = np.asarray(image, dtype=np.float64)
    flipped = []
    for flip in config.flips:
        scanned = scan_image(flip_image(image, flip), config, convolver, programmer)
        flipped.append((flip, unflip_field(scanned, flip)))
        logger.debug(f"Fused {flip} scan")

    return fuse_scans(base, flipped, config.fusion)

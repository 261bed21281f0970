"""
Wind Erosion
Edge-graph filter that removes spurs and short false edges from a binary edge map
while keeping boundary, long and structurally supported edges
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
from scipy import ndimage
from skimage.morphology import thin

logger = logging.getLogger(__name__)

Pixel = Tuple[int, int]

_EIGHT = np.ones((3, 3), dtype=bool)
_BLOCK = np.ones((2, 2), dtype=bool)
_NEIGHBOUR_KERNEL = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=np.int32)
# 4-neighbours first so walks and shortest paths prefer straight steps
_OFFSETS = ((-1, 0), (0, -1), (0, 1), (1, 0), (-1, -1), (-1, 1), (1, -1), (1, 1))

# Segments meeting at a junction continue one another above 150 degrees
_CONTINUATION_COS = float(np.cos(np.deg2rad(150.0)))
_DIRECTION_SPAN = 5

STEP_NAMES = (
    'find_boundaries',
    'process_long_edges',
    'split_edges',
    'clear_edges',
    'restore_junctions',
    'restore_protected',
    'restore_boundaries',
)


@dataclass
class ErosionParams:
    """
    Tunables of the filter

    Attributes:
        long_ratio: Edges longer than long_ratio * mean length are protected
        min_length: Edges shorter than this are short (and spur candidates)
        max_cuts: A parent survives only with fewer deleted children than this
        cut_ratio: ... and fewer than cut_ratio * its child count
        boundary_band: Width in pixels of the frame band that marks boundary edges
    """

    long_ratio: float = 3.0
    min_length: int = 10
    max_cuts: int = 3
    cut_ratio: float = 0.5
    boundary_band: int = 2

    def __post_init__(self):
        if self.long_ratio <= 0:
            raise ValueError(f"long_ratio must be positive, got {self.long_ratio}")
        if not 0.0 < self.cut_ratio < 1.0:
            raise ValueError(f"cut_ratio must lie in (0, 1), got {self.cut_ratio}")
        if self.min_length < 1 or self.max_cuts < 0 or self.boundary_band < 0:
            raise ValueError(
                f"Invalid erosion params: min_length={self.min_length}, "
                f"max_cuts={self.max_cuts}, boundary_band={self.boundary_band}"
            )
        self.min_length = int(self.min_length)
        self.max_cuts = int(self.max_cuts)
        self.boundary_band = int(self.boundary_band)

    def to_dict(self) -> Dict:
        return {
            'long_ratio': self.long_ratio,
            'min_length': self.min_length,
            'max_cuts': self.max_cuts,
            'cut_ratio': self.cut_ratio,
            'boundary_band': self.boundary_band,
        }


@dataclass
class EdgeSegment:
    """Maximal chain of non-junction edge pixels"""

    id: int
    pixels: np.ndarray
    endpoints: List[Pixel]
    start_clusters: Tuple[int, ...] = ()
    end_clusters: Tuple[int, ...] = ()

    @property
    def length(self) -> int:
        return len(self.pixels)

    @property
    def clusters(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.start_clusters) | set(self.end_clusters)))

    @property
    def is_spur(self) -> bool:
        """Hangs off a junction with its other end free"""
        if not self.endpoints:
            return False
        if self.length == 1:
            return len(self.clusters) == 1
        return bool(self.start_clusters) != bool(self.end_clusters)


@dataclass
class EdgeGraph:
    """Segments, junction clusters and the bookkeeping sets of the filter"""

    shape: Tuple[int, int]
    segments: List[EdgeSegment] = field(default_factory=list)
    clusters: List[np.ndarray] = field(default_factory=list)
    strokes: Dict[int, List[int]] = field(default_factory=dict)
    parent_children: Dict[int, List[int]] = field(default_factory=dict)
    boundary: Set[int] = field(default_factory=set)
    protected: Set[int] = field(default_factory=set)
    deleted: Set[int] = field(default_factory=set)
    restored: Set[int] = field(default_factory=set)

    @property
    def junctions(self) -> List[Pixel]:
        return [tuple(int(v) for v in p) for cluster in self.clusters for p in cluster]

    def segment(self, segment_id: int) -> EdgeSegment:
        return self.segments[segment_id]

    def active(self) -> List[EdgeSegment]:
        return [s for s in self.segments if s.id not in self.deleted]


class ErosionTrace:
    """Per-step record of a filter run"""

    def __init__(self):
        self.steps: List[Dict] = []
        self.input_pixels = 0
        self.output_pixels = 0
        self.deleted_segment_pixels = 0
        self.dropped_junction_pixels = 0
        # Removed by thinning and not reattached to a surviving edge
        self.thinned_pixels = 0

    def record(self, step: str, graph: EdgeGraph, **details):
        entry = {
            'step': step,
            'segments': len(graph.segments),
            'active': len(graph.segments) - len(graph.deleted),
            'deleted': len(graph.deleted),
        }
        for key, value in details.items():
            entry[key] = sorted(value) if isinstance(value, set) else value
        self.steps.append(entry)
        logger.debug(f"{step}: {entry['active']}/{entry['segments']} segments active")

    def to_dict(self) -> Dict:
        return {
            'steps': self.steps,
            'input_pixels': self.input_pixels,
            'output_pixels': self.output_pixels,
            'deleted_segment_pixels': self.deleted_segment_pixels,
            'dropped_junction_pixels': self.dropped_junction_pixels,
            'thinned_pixels': self.thinned_pixels,
        }


class _UnionFind:

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, item: int) -> int:
        while self.parent[item] != item:
            self.parent[item] = self.parent[self.parent[item]]
            item = self.parent[item]
        return item

    def union(self, first: int, second: int):
        root_a, root_b = self.find(first), self.find(second)
        if root_a != root_b:
            # Smallest id becomes the root
            low, high = sorted((root_a, root_b))
            self.parent[high] = low


def _neighbours(pixel: Pixel, shape: Tuple[int, int]):
    rows, cols = shape
    r, c = pixel
    for dr, dc in _OFFSETS:
        nr, nc = r + dr, c + dc
        if 0 <= nr < rows and 0 <= nc < cols:
            yield nr, nc


def _order_chain(pixels: List[Pixel], shape: Tuple[int, int]) -> Tuple[List[Pixel], bool]:
    """Walk a segment from an endpoint; returns (ordered pixels, closed)"""
    members = set(pixels)
    degree = {p: sum(1 for n in _neighbours(p, shape) if n in members) for p in pixels}
    ends = [p for p in pixels if degree[p] <= 1]
    closed = not ends
    start = ends[0] if ends else pixels[0]

    ordered = [start]
    visited = {start}
    current = start
    while True:
        step = next((n for n in _neighbours(current, shape) if n in members and n not in visited), None)
        if step is None:
            break
        ordered.append(step)
        visited.add(step)
        current = step

    # Anything the walk could not reach stays in raster order
    ordered.extend(p for p in pixels if p not in visited)
    return ordered, closed


def _touching_clusters(pixel: Pixel, cluster_labels: np.ndarray) -> Tuple[int, ...]:
    found = {int(cluster_labels[n]) - 1 for n in _neighbours(pixel, cluster_labels.shape)
             if cluster_labels[n] > 0}
    return tuple(sorted(found))


def _outgoing_direction(segment: EdgeSegment, cluster: int, centroid: np.ndarray) -> Optional[np.ndarray]:
    at_start = cluster in segment.start_clusters
    at_end = cluster in segment.end_clusters
    if at_start == at_end:
        return None

    span = segment.pixels[:_DIRECTION_SPAN] if at_start else segment.pixels[-_DIRECTION_SPAN:]
    direction = span.mean(axis=0) - centroid
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        return None
    return direction / norm


def _group_strokes(segments: List[EdgeSegment], clusters: List[np.ndarray]) -> Dict[int, List[int]]:
    """Join segments that continue straight through a junction cluster"""
    union = _UnionFind(len(segments))
    incident: Dict[int, List[int]] = {}
    for segment in segments:
        for cluster in segment.clusters:
            incident.setdefault(cluster, []).append(segment.id)

    for cluster, members in sorted(incident.items()):
        centroid = clusters[cluster].mean(axis=0)
        directions = {}
        for segment_id in members:
            direction = _outgoing_direction(segments[segment_id], cluster, centroid)
            if direction is not None:
                directions[segment_id] = direction

        ids = sorted(directions)
        candidates = []
        for i, first in enumerate(ids):
            for second in ids[i + 1:]:
                cosine = float(directions[first] @ directions[second])
                if cosine < _CONTINUATION_COS:
                    candidates.append((cosine, first, second))

        paired: Set[int] = set()
        for _, first, second in sorted(candidates):
            if first in paired or second in paired:
                continue
            union.union(first, second)
            paired.update((first, second))

    strokes: Dict[int, List[int]] = {}
    for segment in segments:
        strokes.setdefault(union.find(segment.id), []).append(segment.id)
    return strokes


def thin_edges(edge_map: np.ndarray) -> np.ndarray:
    """
    Thin every edge component that contains a full 2x2 block

    In a run two or more pixels wide every pixel has at least three edge
    neighbours, so without thinning the whole run is one junction cluster
    with no segments. Components that are already one pixel wide are
    returned unchanged.

    Args:
        edge_map: Binary map (nonzero = edge)

    Returns:
        Boolean mask, a subset of the input
    """
    mask = np.asarray(edge_map) > 0
    blocks = ndimage.binary_erosion(mask, structure=_BLOCK)
    if not blocks.any():
        return mask

    labels, _ = ndimage.label(mask, structure=_EIGHT)
    thick = np.isin(labels, np.unique(labels[blocks]))
    return (mask & ~thick) | (thin(mask) & thick)


def build_edge_graph(edge_map: np.ndarray) -> EdgeGraph:
    """
    Decompose a binary edge map into segments and junction clusters

    A junction is an edge pixel with at least three edge neighbours; the
    remaining pixels are labelled into 8-connected chains.

    Args:
        edge_map: Binary map (nonzero = edge)

    Returns:
        EdgeGraph with segments ordered by label and strokes grouped
    """
    mask = np.asarray(edge_map) > 0
    graph = EdgeGraph(shape=mask.shape)
    if not mask.any():
        return graph

    neighbour_count = ndimage.convolve(mask.astype(np.int32), _NEIGHBOUR_KERNEL, mode='constant', cval=0)
    junction = mask & (neighbour_count >= 3)

    cluster_labels, cluster_count = ndimage.label(junction, structure=_EIGHT)
    segment_labels, segment_count = ndimage.label(mask & ~junction, structure=_EIGHT)

    cluster_coords = np.argwhere(cluster_labels > 0)
    cluster_ids = cluster_labels[cluster_coords[:, 0], cluster_coords[:, 1]] - 1
    graph.clusters = [cluster_coords[cluster_ids == i] for i in range(cluster_count)]

    coords = np.argwhere(segment_labels > 0)
    labels = segment_labels[coords[:, 0], coords[:, 1]] - 1
    order = np.argsort(labels, kind='stable')
    bounds = np.searchsorted(labels[order], np.arange(segment_count + 1))

    for segment_id in range(segment_count):
        raw = [tuple(int(v) for v in p) for p in coords[order[bounds[segment_id]:bounds[segment_id + 1]]]]
        ordered, closed = _order_chain(raw, mask.shape)

        if closed:
            endpoints: List[Pixel] = []
        elif len(ordered) == 1:
            endpoints = [ordered[0]]
        else:
            endpoints = [ordered[0], ordered[-1]]

        start_clusters = _touching_clusters(ordered[0], cluster_labels) if endpoints else ()
        end_clusters = _touching_clusters(ordered[-1], cluster_labels) if endpoints else ()

        graph.segments.append(EdgeSegment(
            id=segment_id,
            pixels=np.array(ordered, dtype=np.int64),
            endpoints=endpoints,
            start_clusters=start_clusters,
            end_clusters=end_clusters,
        ))

    graph.strokes = _group_strokes(graph.segments, graph.clusters)
    logger.debug(f"Edge graph: {segment_count} segments, {cluster_count} junction clusters, "
                 f"{len(graph.strokes)} strokes")
    return graph


def _in_band(pixels: np.ndarray, shape: Tuple[int, int], band: int) -> bool:
    if band <= 0 or len(pixels) == 0:
        return False
    rows, cols = shape
    r, c = pixels[:, 0], pixels[:, 1]
    distance = np.minimum(np.minimum(r, rows - 1 - r), np.minimum(c, cols - 1 - c))
    return bool((distance < band).any())


def find_boundaries(graph: EdgeGraph, params: ErosionParams,
                    trace: Optional[ErosionTrace] = None) -> EdgeGraph:
    """
    Step 1: collect edges lying along the image frame

    Pixels within boundary_band of a junction are ignored so that branches
    leaving a frame edge inward are not pulled into the boundary set.
    """
    band = params.boundary_band
    for segment in graph.segments:
        head = band if segment.start_clusters else 0
        tail = band if segment.end_clusters else 0
        core = segment.pixels[head:max(head, segment.length - tail)]
        if _in_band(core, graph.shape, band):
            graph.boundary.add(segment.id)

    if trace is not None:
        trace.record(STEP_NAMES[0], graph, boundary=graph.boundary)
    return graph


def process_long_edges(graph: EdgeGraph, params: ErosionParams,
                       trace: Optional[ErosionTrace] = None) -> EdgeGraph:
    """Step 2: protect edges much longer than the mean edge"""
    units = []
    for _, children in sorted(graph.strokes.items()):
        kept = [c for c in children if c not in graph.boundary]
        if kept:
            units.append(kept)

    mean_lengths = []
    if units:
        lengths = [sum(graph.segments[c].length for c in unit) for unit in units]
        e_mean = float(np.mean(lengths))
        mean_lengths.append(e_mean)

        split_units = []
        for unit, length in zip(units, lengths):
            if length > 2 * e_mean and len(unit) > 1:
                split_units.extend([c] for c in unit)
            else:
                split_units.append(unit)

        lengths = [sum(graph.segments[c].length for c in unit) for unit in split_units]
        e_mean = float(np.mean(lengths))
        mean_lengths.append(e_mean)

        for unit, length in zip(split_units, lengths):
            if length > params.long_ratio * e_mean:
                graph.protected.update(unit)

    if trace is not None:
        trace.record(STEP_NAMES[1], graph, protected=graph.protected, mean_lengths=mean_lengths)
    return graph


def split_edges(graph: EdgeGraph, trace: Optional[ErosionTrace] = None) -> EdgeGraph:
    """Step 3: record parent edges and their junction-split children"""
    graph.parent_children = {parent: list(children) for parent, children in sorted(graph.strokes.items())}

    if trace is not None:
        trace.record(STEP_NAMES[2], graph, parents=len(graph.parent_children))
    return graph


def clear_edges(graph: EdgeGraph, params: ErosionParams,
                trace: Optional[ErosionTrace] = None) -> EdgeGraph:
    """Step 4: delete spurs, then every other short unprotected edge"""
    spurs, short = [], []
    for segment in graph.segments:
        if segment.id in graph.boundary or segment.id in graph.protected:
            continue
        if segment.length >= params.min_length:
            continue
        (spurs if segment.is_spur else short).append(segment.id)

    graph.deleted.update(spurs)
    graph.deleted.update(short)

    if trace is not None:
        trace.record(STEP_NAMES[3], graph, spurs=spurs, short=short)
    return graph


def should_restore(child_count: int, cut_count: int, params: ErosionParams) -> bool:
    """Parent rule: few enough children cut, absolutely and relatively"""
    return cut_count < params.max_cuts and cut_count < child_count * params.cut_ratio


def restore_junctions(graph: EdgeGraph, params: ErosionParams,
                      trace: Optional[ErosionTrace] = None) -> EdgeGraph:
    """Step 5: restore lightly cut parents, delete heavily cut ones whole"""
    restored, removed_parents = [], []
    for parent, children in sorted(graph.parent_children.items()):
        cut = [c for c in children if c in graph.deleted]
        if not cut:
            continue
        if should_restore(len(children), len(cut), params):
            graph.deleted.difference_update(cut)
            graph.restored.update(cut)
            restored.extend(cut)
        else:
            graph.deleted.update(children)
            removed_parents.append(parent)

    if trace is not None:
        trace.record(STEP_NAMES[4], graph, restored=restored, removed_parents=removed_parents)
    return graph


def restore_protected(graph: EdgeGraph, params: ErosionParams,
                      trace: Optional[ErosionTrace] = None) -> EdgeGraph:
    """Step 6: bring protected edges back; short edges still deleted stay deleted"""
    revived = graph.protected & graph.deleted
    graph.deleted.difference_update(graph.protected)
    still_short = [s.id for s in graph.segments if s.id in graph.deleted and s.length < params.min_length]

    if trace is not None:
        trace.record(STEP_NAMES[5], graph, revived=revived, still_short=still_short)
    return graph


def restore_boundaries(graph: EdgeGraph, trace: Optional[ErosionTrace] = None) -> EdgeGraph:
    """Step 7: bring boundary edges back"""
    revived = graph.boundary & graph.deleted
    graph.deleted.difference_update(graph.boundary)

    if trace is not None:
        trace.record(STEP_NAMES[6], graph, revived=revived)
    return graph


def _cluster_paths(cluster: np.ndarray, ports: List[Pixel], shape: Tuple[int, int]) -> Set[Pixel]:
    """Cluster pixels on breadth-first shortest paths from the first port to the others"""
    members = {tuple(int(v) for v in p) for p in cluster}
    origin = ports[0]
    came_from: Dict[Pixel, Optional[Pixel]] = {origin: None}
    queue = deque([origin])
    while queue:
        current = queue.popleft()
        for n in _neighbours(current, shape):
            if n in members and n not in came_from:
                came_from[n] = current
                queue.append(n)

    kept = {origin}
    for port in ports[1:]:
        node: Optional[Pixel] = port
        while node is not None and node not in kept:
            kept.add(node)
            node = came_from.get(node)
    return kept


def rasterize(graph: EdgeGraph) -> Tuple[np.ndarray, int]:
    """
    Draw surviving segments and the junction pixels that still connect them

    Returns:
        (binary edge map, number of junction pixels dropped)
    """
    out = np.zeros(graph.shape, dtype=np.uint8)
    alive = graph.active()
    for segment in alive:
        out[segment.pixels[:, 0], segment.pixels[:, 1]] = 255

    attached: Dict[int, List[Tuple[EdgeSegment, Pixel]]] = {}
    for segment in alive:
        if not segment.endpoints:
            continue
        first = tuple(int(v) for v in segment.pixels[0])
        last = tuple(int(v) for v in segment.pixels[-1])
        for cluster in segment.start_clusters:
            attached.setdefault(cluster, []).append((segment, first))
        for cluster in segment.end_clusters:
            attached.setdefault(cluster, []).append((segment, last))

    dropped = 0
    for index, cluster in enumerate(graph.clusters):
        links = attached.get(index, [])
        if len({segment.id for segment, _ in links}) < 2:
            dropped += len(cluster)
            continue

        members = {tuple(int(v) for v in p) for p in cluster}
        ports: Set[Pixel] = set()
        for _, end in links:
            ports.update(n for n in _neighbours(end, graph.shape) if n in members)

        kept = _cluster_paths(cluster, sorted(ports), graph.shape)
        for r, c in kept:
            out[r, c] = 255
        dropped += len(cluster) - len(kept)

    return out, dropped


def wind_erosion(edge_map: np.ndarray, params: Optional[ErosionParams] = None) -> Tuple[np.ndarray, ErosionTrace]:
    """
    Run the seven filter steps on a binary edge map

    Thick runs are thinned before the graph is built; pixels removed by
    thinning are put back where they touch a surviving edge.

    Args:
        edge_map: Binary map (nonzero = edge)
        params: Filter parameters (defaults when None)

    Returns:
        (filtered {0, 255} map, trace)
    """
    params = params or ErosionParams()
    trace = ErosionTrace()

    mask = np.asarray(edge_map) > 0
    thinned = thin_edges(mask)
    graph = build_edge_graph(thinned)
    trace.input_pixels = int(mask.sum())

    find_boundaries(graph, params, trace)
    process_long_edges(graph, params, trace)
    split_edges(graph, trace)
    clear_edges(graph, params, trace)
    restore_junctions(graph, params, trace)
    restore_protected(graph, params, trace)
    restore_boundaries(graph, trace)

    output, dropped = rasterize(graph)
    thinned_away = mask & ~thinned
    if thinned_away.any():
        # Thinned pixels come back beside the edges that survived
        reattached = thinned_away & ndimage.binary_dilation(output > 0, structure=_EIGHT)
        output[reattached] = 255
        trace.thinned_pixels = int((thinned_away & ~reattached).sum())

    trace.output_pixels = int((output > 0).sum())
    trace.deleted_segment_pixels = sum(graph.segments[i].length for i in graph.deleted)
    trace.dropped_junction_pixels = dropped

    logger.debug(f"Wind erosion kept {trace.output_pixels}/{trace.input_pixels} pixels")
    return output, trace

"""BVH motion-capture parsing, forward kinematics, and joint bending angles.

The hierarchy section is tokenized with line/column tracking so malformed
files fail with a location. Rotation channels are applied as intrinsic
rotations in the order declared by each joint's CHANNELS line, which is the
convention BVH exporters follow. All positions are in file units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateDataError, ParseError, SchemaError

_POSITION_CHANNELS = ("Xposition", "Yposition", "Zposition")
_ROTATION_CHANNELS = ("Xrotation", "Yrotation", "Zrotation")
_VALID_CHANNELS = _POSITION_CHANNELS + _ROTATION_CHANNELS


@dataclass
class BvhJoint:
    name: str
    offset: np.ndarray                # (3,)
    channels: tuple[str, ...]
    parent: int                       # -1 for the root
    children: list[int] = field(default_factory=list)
    end_offset: np.ndarray | None = None
    chan_start: int = 0               # first motion column owned by this joint


class BvhDocument:
    """Parsed skeleton plus the motion matrix (frames x channels)."""

    def __init__(self, joints: list[BvhJoint], motion: np.ndarray, frame_time: float):
        if frame_time <= 0:
            raise SchemaError(f"frame time must be positive, got {frame_time}")
        if motion.ndim != 2 or motion.shape[0] < 1:
            raise SchemaError("motion must hold at least one frame")
        total = sum(len(j.channels) for j in joints)
        if motion.shape[1] != total:
            raise SchemaError(
                f"motion has {motion.shape[1]} columns but skeleton declares {total} channels"
            )
        self.joints = joints
        self.motion = motion
        self.frame_time = frame_time
        self.name_to_index = {j.name: i for i, j in enumerate(joints)}

    @property
    def n_frames(self) -> int:
        return self.motion.shape[0]

    def joint_index(self, name: str) -> int:
        if name not in self.name_to_index:
            raise DataError(f"unknown joint {name!r}")
        return self.name_to_index[name]

    def is_ancestor(self, anc: int, node: int) -> bool:
        j = self.joints[node].parent
        while j != -1:
            if j == anc:
                return True
            j = self.joints[j].parent
        return False


@dataclass(frozen=True)
class JointTriple:
    """Segments (parent->vertex) and (vertex->child) meeting at vertex."""

    parent: str
    vertex: str
    child: str


class _Tokens:
    def __init__(self, text: str):
        self.toks: list[tuple[str, int, int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            col = 0
            for part in line.split():
                col = line.index(part, col)
                self.toks.append((part, lineno, col + 1))
                col += len(part)
        self.pos = 0

    def peek(self):
        if self.pos >= len(self.toks):
            raise ParseError("unexpected end of file")
        return self.toks[self.pos]

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, word: str):
        tok, line, col = self.next()
        if tok != word:
            raise ParseError(f"line {line}, col {col}: expected {word!r}, got {tok!r}")
        return line

    def next_float(self) -> float:
        tok, line, col = self.next()
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"line {line}, col {col}: expected a number, got {tok!r}") from None

    def next_int(self) -> int:
        tok, line, col = self.next()
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"line {line}, col {col}: expected an integer, got {tok!r}") from None


def _unique_name(name: str, seen: set[str]) -> str:
    if name not in seen:
        return name
    k = 2
    while f"{name}_{k}" in seen:
        k += 1
    return f"{name}_{k}"


def _parse_joint(tk: _Tokens, joints: list[BvhJoint], parent: int, seen: set[str]) -> None:
    tok, line, col = tk.next()
    name = _unique_name(tok, seen)
    seen.add(name)
    joint = BvhJoint(name=name, offset=np.zeros(3), channels=(), parent=parent)
    idx = len(joints)
    joints.append(joint)
    if parent != -1:
        joints[parent].children.append(idx)

    tk.expect("{")
    tk.expect("OFFSET")
    joint.offset = np.array([tk.next_float() for _ in range(3)])
    tok, line, col = tk.peek()
    if tok == "CHANNELS":
        tk.next()
        n = tk.next_int()
        chans = []
        for _ in range(n):
            ch, cline, ccol = tk.next()
            if ch not in _VALID_CHANNELS:
                raise ParseError(f"line {cline}, col {ccol}: unknown channel {ch!r}")
            chans.append(ch)
        joint.channels = tuple(chans)
    while True:
        tok, line, col = tk.peek()
        if tok == "JOINT":
            tk.next()
            _parse_joint(tk, joints, idx, seen)
        elif tok == "End":
            tk.next()
            tk.expect("Site")
            tk.expect("{")
            tk.expect("OFFSET")
            joint.end_offset = np.array([tk.next_float() for _ in range(3)])
            tk.expect("}")
        elif tok == "}":
            tk.next()
            return
        else:
            raise ParseError(f"line {line}, col {col}: expected JOINT, End Site or '}}', got {tok!r}")


def parse_bvh(text: str) -> BvhDocument:
    """Parse a complete BVH file into a document."""
    lines = text.splitlines()
    tk = _Tokens(text)
    tk.expect("HIERARCHY")
    tk.expect("ROOT")
    joints: list[BvhJoint] = []
    _parse_joint(tk, joints, -1, set())

    col = 0
    for j in joints:
        j.chan_start = col
        col += len(j.channels)
    n_channels = col

    tk.expect("MOTION")
    tk.expect("Frames:")
    n_frames = tk.next_int()
    tk.expect("Frame")
    data_start_line = tk.expect("Time:")
    frame_time = tk.next_float()
    if n_frames < 1:
        raise SchemaError(f"Frames: must be >= 1, got {n_frames}")

    rows = []
    for lineno in range(data_start_line, len(lines)):
        line = lines[lineno].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != n_channels:
            raise SchemaError(
                f"line {lineno + 1}: data row has {len(parts)} values, expected {n_channels}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(f"line {lineno + 1}: {exc}") from None
    if len(rows) != n_frames:
        raise SchemaError(f"declared Frames: {n_frames} but found {len(rows)} data rows")
    motion = np.array(rows, dtype=np.float64).reshape(n_frames, n_channels)
    return BvhDocument(joints, motion, frame_time)


def load_bvh(path) -> BvhDocument:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_bvh(fh.read())


def format_bvh(doc: BvhDocument) -> str:
    """Serialize back to BVH text; floats use shortest round-trip repr."""
    out: list[str] = ["HIERARCHY"]

    def emit(idx: int, depth: int) -> None:
        j = doc.joints[idx]
        pad = "  " * depth
        kw = "ROOT" if j.parent == -1 else "JOINT"
        out.append(f"{pad}{kw} {j.name}")
        out.append(f"{pad}{{")
        inner = "  " * (depth + 1)
        ox, oy, oz = (float(v) for v in j.offset)
        out.append(f"{inner}OFFSET {ox!r} {oy!r} {oz!r}")
        if j.channels:
            out.append(f"{inner}CHANNELS {len(j.channels)} " + " ".join(j.channels))
        for c in j.children:
            emit(c, depth + 1)
        if j.end_offset is not None:
            ex, ey, ez = (float(v) for v in j.end_offset)
            out.append(f"{inner}End Site")
            out.append(f"{inner}{{")
            out.append(f"{inner}  OFFSET {ex!r} {ey!r} {ez!r}")
            out.append(f"{inner}}}")
        out.append(f"{pad}}}")

    emit(0, 0)
    out.append("MOTION")
    out.append(f"Frames: {doc.n_frames}")
    out.append(f"Frame Time: {doc.frame_time!r}")
    for f in range(doc.n_frames):
        out.append(" ".join(repr(float(v)) for v in doc.motion[f]))
    return "\n".join(out) + "\n"


def _axis_rotation(axis: str, deg: float) -> np.ndarray:
    rad = np.deg2rad(deg)
    c, s = np.cos(rad), np.sin(rad)
    if axis == "X":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "Y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _local_transform(joint: BvhJoint, row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rot = np.eye(3)
    trans = joint.offset.copy()
    for k, ch in enumerate(joint.channels):
        v = row[joint.chan_start + k]
        if ch in _POSITION_CHANNELS:
            trans["XYZ".index(ch[0])] += v
        else:
            rot = rot @ _axis_rotation(ch[0], v)
    return rot, trans


def forward_kinematics(doc: BvhDocument, frame: int) -> dict[str, np.ndarray]:
    """World positions of all joints (and `<name>_end` sites) at one frame."""
    if not 0 <= frame < doc.n_frames:
        raise IndexError(f"frame {frame} out of range [0, {doc.n_frames})")
    row = doc.motion[frame]
    world_rot: list[np.ndarray] = [None] * len(doc.joints)
    positions: dict[str, np.ndarray] = {}
    for i, j in enumerate(doc.joints):
        r_loc, t_loc = _local_transform(j, row)
        if j.parent == -1:
            rw, pw = r_loc, t_loc
        else:
            rp = world_rot[j.parent]
            pw = positions[doc.joints[j.parent].name] + rp @ t_loc
            rw = rp @ r_loc
        world_rot[i] = rw
        positions[j.name] = pw
        if j.end_offset is not None:
            positions[j.name + "_end"] = pw + rw @ j.end_offset
    return positions


def _validate_triple(doc: BvhDocument, triple: JointTriple) -> None:
    pi = doc.joint_index(triple.parent)
    vi = doc.joint_index(triple.vertex)
    if doc.joints[vi].parent != pi:
        raise DataError(f"vertex {triple.vertex!r} is not a child of {triple.parent!r}")
    child = triple.child
    base = child[:-4] if child.endswith("_end") else child
    ci = doc.joint_index(base)
    if child.endswith("_end") and doc.joints[ci].end_offset is None:
        raise DataError(f"joint {base!r} has no end site")
    if ci != vi and not doc.is_ancestor(vi, ci):
        raise DataError(f"child {child!r} is not below vertex {triple.vertex!r} in the skeleton")
    if ci == vi and not child.endswith("_end"):
        raise DataError("child must differ from vertex")


def joint_angle(doc: BvhDocument, triple: JointTriple, frame: int) -> float:
    """Bending angle in degrees at the vertex joint, in [0, 180].

    Uses the normalized dot product of the two segment vectors, with the
    cosine clamped to [-1, 1] to absorb float drift at collinear poses.
    """
    _validate_triple(doc, triple)
    pos = forward_kinematics(doc, frame)
    v1 = pos[triple.parent] - pos[triple.vertex]
    v2 = pos[triple.child] - pos[triple.vertex]
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 < 1e-12 or n2 < 1e-12:
        raise DegenerateDataError(
            f"segment at vertex {triple.vertex!r} has near-zero length at frame {frame}"
        )
    cos = float(np.dot(v1, v2) / (n1 * n2))
    cos = max(-1.0, min(1.0, cos))
    return float(np.degrees(np.arccos(cos)))


def angle_series(doc: BvhDocument, triple: JointTriple) -> np.ndarray:
    """joint_angle evaluated at every frame."""
    _validate_triple(doc, triple)
    return np.array([joint_angle(doc, triple, f) for f in range(doc.n_frames)])


def export_angles(doc: BvhDocument, triple: JointTriple, out_path) -> None:
    """Write `frame,angle_deg` rows for all frames (6 decimals)."""
    angles = angle_series(doc, triple)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame,angle_deg\n")
        for f, a in enumerate(angles):
            fh.write(f"{f},{a:.6f}\n")


def load_angle_csv(path) -> np.ndarray:
    """Read a `frame,angle_deg` file back into an angle array (degrees)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "frame,angle_deg":
        raise SchemaError(f"{path}: expected header 'frame,angle_deg'")
    rows = [ln for ln in lines[1:] if ln.strip()]
    if not rows:
        raise DataError(f"{path}: no data rows")
    angles = np.empty(len(rows))
    for i, ln in enumerate(rows):
        cells = ln.split(",")
        if len(cells) != 2:
            raise SchemaError(f"{path}:{i + 2}: expected 2 columns, got {len(cells)}")
        try:
            angles[i] = float(cells[1])
        except ValueError as exc:
            raise ParseError(f"{path}:{i + 2}: {exc}") from None
    return angles

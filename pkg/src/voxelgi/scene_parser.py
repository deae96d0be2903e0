"""Scene description DSL: lexer, recursive-descent parser, scene builder,
and a canonical serializer.

Grammar (C-like braces and semicolons)::

    scene := block* EOF
    block := IDENT "{" entry* "}"
    entry := IDENT ":" value ";" | block
    value := NUMBER | STRING | "(" NUMBER ("," NUMBER)* ")"

Comments run from ``//`` to the end of the line. Strings are double-quoted
with no escape sequences. Recognized top-level blocks: ``model``,
``pointlight``, ``camera``, ``settings``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conetracer import ConeSettings
from .geometry import PRIMITIVES, Camera, Mesh, Transform, load_obj
from .lighting import Material, PointLight


class SceneError(ValueError):
    """Lex/parse/build failure with a 1-based source position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass
class Token:
    kind: str
    lexeme: str
    line: int
    column: int


TOKEN_KINDS = ("IDENT", "NUMBER", "STRING", "LBRACE", "RBRACE", "LPAREN",
               "RPAREN", "COLON", "SEMI", "COMMA", "EOF")

_TOKEN_RE = re.compile(
    r"""
    (?P<NUMBER>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<STRING>"[^"\n]*")
  | (?P<LBRACE>\{) | (?P<RBRACE>\})
  | (?P<LPAREN>\() | (?P<RPAREN>\))
  | (?P<COLON>:) | (?P<SEMI>;) | (?P<COMMA>,)
    """,
    re.VERBOSE,
)


def lex(text: str) -> list[Token]:
    """Tokenize a scene document; raises SceneError on illegal characters."""
    tokens: list[Token] = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        pos = 0
        while pos < len(line):
            ch = line[pos]
            if ch in " \t\r":
                pos += 1
                continue
            if line.startswith("//", pos):
                break
            m = _TOKEN_RE.match(line, pos)
            if m is None:
                raise SceneError(f"illegal character {ch!r}", line_no, pos + 1)
            kind = m.lastgroup
            lexeme = m.group()
            if kind == "NUMBER" and not math.isfinite(float(lexeme)):
                raise SceneError(f"non-finite number {lexeme!r}", line_no, pos + 1)
            tokens.append(Token(kind, lexeme, line_no, pos + 1))
            pos = m.end()
    last_line = text.count("\n") + 1
    tokens.append(Token("EOF", "", last_line, 1))
    return tokens


def detokenize(tokens: list[Token]) -> str:
    """Space-join lexemes back into a parseable document (kinds survive)."""
    return " ".join(t.lexeme for t in tokens if t.kind != "EOF")


@dataclass
class SyntaxNode:
    """Tree node: either a parent (children) or a leaf entry (value)."""

    name: str
    line: int
    column: int
    children: list["SyntaxNode"] | None = None
    value: float | tuple | str | None = None

    def __post_init__(self):
        if (self.children is None) == (self.value is None):
            raise ValueError("node must have children xor a value")

    def child_map(self) -> dict:
        return {c.name: c for c in (self.children or [])}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise SceneError(
                f"expected {kind}, got {tok.kind} {tok.lexeme!r}", tok.line, tok.column
            )
        return self.advance()

    def parse_scene(self) -> SyntaxNode:
        blocks = []
        while self.peek().kind != "EOF":
            blocks.append(self.parse_block())
        return SyntaxNode("scene", 1, 1, children=blocks)

    def parse_block(self) -> SyntaxNode:
        name = self.expect("IDENT")
        self.expect("LBRACE")
        entries = []
        while True:
            tok = self.peek()
            if tok.kind == "RBRACE":
                self.advance()
                break
            if tok.kind == "EOF":
                raise SceneError("unbalanced braces: missing '}'", tok.line, tok.column)
            entries.append(self.parse_entry())
        return SyntaxNode(name.lexeme, name.line, name.column, children=entries)

    def parse_entry(self) -> SyntaxNode:
        name = self.expect("IDENT")
        if self.peek().kind == "LBRACE":
            self.pos -= 1  # re-read IDENT as a nested block
            return self.parse_block()
        self.expect("COLON")
        value = self.parse_value()
        self.expect("SEMI")
        return SyntaxNode(name.lexeme, name.line, name.column, value=value)

    def parse_value(self):
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return float(tok.lexeme)
        if tok.kind == "STRING":
            self.advance()
            return tok.lexeme[1:-1]
        if tok.kind == "LPAREN":
            self.advance()
            items = [float(self.expect("NUMBER").lexeme)]
            while self.peek().kind == "COMMA":
                self.advance()
                items.append(float(self.expect("NUMBER").lexeme))
            self.expect("RPAREN")
            return tuple(items)
        raise SceneError(
            f"expected value (NUMBER, STRING or tuple), got {tok.kind}",
            tok.line, tok.column,
        )


def parse(tokens: list[Token]) -> SyntaxNode:
    return _Parser(tokens).parse_scene()


DEFAULT_ATTENUATION = (1.0, 0.09, 0.032)
DEFAULT_CAMERA_FOV = 1.0

MODEL_KEYS = {"file", "shape", "name", "position", "scale", "rotation", "static"}
MATERIAL_KEYS = {"color", "ambient", "diffuse", "specular", "shininess"}
POINTLIGHT_KEYS = {"position", "color", "attenuation"}
CAMERA_KEYS = {"position", "yaw", "pitch", "fov", "near", "far"}
SETTINGS_KEYS = set(ConeSettings().to_flat().keys())


@dataclass
class Model:
    """One placed mesh: source reference, placement, and surface material."""

    name: str
    source: tuple[str, str]               # ("shape", name) or ("file", path)
    mesh: Mesh
    position: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray
    static: bool = False
    material: Material = field(default_factory=Material)

    @property
    def transform(self) -> Transform:
        t = Transform()
        t.scale(self.scale)
        t.rotate_euler(*self.rotation)
        t.translate(self.position)
        return t


@dataclass
class Scene:
    """Models, point lights, optional camera, and flat cone-settings overrides."""

    models: list[Model] = field(default_factory=list)
    lights: list[PointLight] = field(default_factory=list)
    camera: Camera | None = None
    settings: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _need(node: SyntaxNode, arity: int | tuple):
    v = node.value
    arities = arity if isinstance(arity, tuple) else (arity,)
    if 1 in arities and isinstance(v, float):
        return (v,)
    if isinstance(v, tuple) and len(v) in arities:
        return v
    raise SceneError(
        f"{node.name} needs {' or '.join(map(str, arities))} scalar(s)",
        node.line, node.column,
    )


def _scalar(node: SyntaxNode) -> float:
    if not isinstance(node.value, float):
        raise SceneError(f"{node.name} needs a scalar", node.line, node.column)
    return node.value


def _string(node: SyntaxNode) -> str:
    if not isinstance(node.value, str):
        raise SceneError(f"{node.name} needs a string", node.line, node.column)
    return node.value


def _check_keys(node: SyntaxNode, allowed: set, strict: bool, warnings: list[str],
                blocks: set = frozenset()):
    for child in node.children or []:
        known = child.name in allowed or child.name in blocks
        if not known:
            msg = f"unknown key '{child.name}' in {node.name}"
            if strict:
                raise SceneError(msg, child.line, child.column)
            warnings.append(f"{child.line}:{child.column}: {msg}")


def _build_material(node: SyntaxNode, strict: bool, warnings: list[str]) -> Material:
    _check_keys(node, MATERIAL_KEYS, strict, warnings)
    entries = node.child_map()
    mat = Material()
    if "color" in entries:
        mat.color = np.array(_need(entries["color"], 3))
    if "ambient" in entries:
        mat.ambient_str = _scalar(entries["ambient"])
    if "diffuse" in entries:
        mat.diffuse_str = _scalar(entries["diffuse"])
    if "specular" in entries:
        mat.specular_str = _scalar(entries["specular"])
    if "shininess" in entries:
        mat.shininess = _scalar(entries["shininess"])
    return Material(mat.color, mat.ambient_str, mat.diffuse_str,
                    mat.specular_str, mat.shininess)


def _load_mesh(node: SyntaxNode, entries: dict, base_dir: Path | None):
    has_file = "file" in entries
    has_shape = "shape" in entries
    if has_file == has_shape:
        raise SceneError("model needs exactly one of 'file' or 'shape'",
                         node.line, node.column)
    if has_shape:
        shape = _string(entries["shape"])
        maker = PRIMITIVES.get(shape)
        if maker is None:
            e = entries["shape"]
            raise SceneError(f"unknown shape '{shape}'", e.line, e.column)
        return ("shape", shape), maker()
    rel = _string(entries["file"])
    path = (base_dir / rel) if base_dir is not None else Path(rel)
    if not path.exists():
        e = entries["file"]
        raise SceneError(f"mesh file not found: {path}", e.line, e.column)
    return ("file", rel), load_obj(path.read_text())


def _build_model(node: SyntaxNode, index: int, strict: bool, warnings: list[str],
                 base_dir: Path | None) -> Model:
    _check_keys(node, MODEL_KEYS, strict, warnings, blocks={"material"})
    entries = node.child_map()
    source, mesh = _load_mesh(node, entries, base_dir)
    position = np.array(_need(entries["position"], 3)) if "position" in entries else np.zeros(3)
    if "scale" in entries:
        s = _need(entries["scale"], (1, 3))
        scale = np.array(s * 3) if len(s) == 1 else np.array(s)
    else:
        scale = np.ones(3)
    rotation = np.array(_need(entries["rotation"], 3)) if "rotation" in entries else np.zeros(3)
    static = bool(_scalar(entries["static"])) if "static" in entries else False
    material = Material()
    for child in node.children or []:
        if child.name == "material" and child.children is not None:
            material = _build_material(child, strict, warnings)
    name = _string(entries["name"]) if "name" in entries else f"model{index}"
    return Model(name=name, source=source, mesh=mesh, position=position,
                 scale=scale, rotation=rotation, static=static, material=material)


def _build_pointlight(node: SyntaxNode, strict: bool, warnings: list[str]) -> PointLight:
    _check_keys(node, POINTLIGHT_KEYS, strict, warnings)
    entries = node.child_map()
    if "position" not in entries:
        raise SceneError("pointlight needs a position", node.line, node.column)
    position = np.array(_need(entries["position"], 3))
    color = np.array(_need(entries["color"], 3)) if "color" in entries else np.ones(3)
    att = _need(entries["attenuation"], 3) if "attenuation" in entries else DEFAULT_ATTENUATION
    try:
        return PointLight(position, color, att[0], att[1], att[2])
    except ValueError as exc:
        raise SceneError(str(exc), node.line, node.column) from None


def _build_camera(node: SyntaxNode, strict: bool, warnings: list[str]) -> Camera:
    _check_keys(node, CAMERA_KEYS, strict, warnings)
    entries = node.child_map()
    cam = Camera(
        position=np.array(_need(entries["position"], 3)) if "position" in entries else np.array([0.0, 0.0, 5.0]),
        yaw=_scalar(entries["yaw"]) if "yaw" in entries else 0.0,
        pitch=_scalar(entries["pitch"]) if "pitch" in entries else 0.0,
        fov_y=_scalar(entries["fov"]) if "fov" in entries else DEFAULT_CAMERA_FOV,
        near=_scalar(entries["near"]) if "near" in entries else 0.1,
        far=_scalar(entries["far"]) if "far" in entries else 100.0,
    )
    return cam


def _build_settings(node: SyntaxNode, strict: bool, warnings: list[str]) -> dict:
    overrides = {}
    for child in node.children or []:
        if child.name not in SETTINGS_KEYS:
            msg = f"unknown setting '{child.name}'"
            if strict:
                raise SceneError(msg, child.line, child.column)
            warnings.append(f"{child.line}:{child.column}: {msg}")
            continue
        overrides[child.name] = _scalar(child)
    try:
        ConeSettings.from_flat(overrides)
    except ValueError as exc:
        raise SceneError(f"invalid settings: {exc}", node.line, node.column) from None
    return overrides


def build(tree: SyntaxNode, base_dir: str | Path | None = None,
          strict: bool = True) -> Scene:
    """Instantiate a Scene from a parsed tree.

    Unknown keys are errors in strict mode and collected warnings otherwise.
    """
    base = Path(base_dir) if base_dir is not None else None
    scene = Scene()
    for node in tree.children or []:
        if node.children is None:
            raise SceneError(f"top-level entry '{node.name}' must be a block",
                             node.line, node.column)
        if node.name == "model":
            scene.models.append(
                _build_model(node, len(scene.models), strict, scene.warnings, base))
        elif node.name == "pointlight":
            scene.lights.append(_build_pointlight(node, strict, scene.warnings))
        elif node.name == "camera":
            scene.camera = _build_camera(node, strict, scene.warnings)
        elif node.name == "settings":
            scene.settings.update(_build_settings(node, strict, scene.warnings))
        else:
            msg = f"unknown block '{node.name}'"
            if strict:
                raise SceneError(msg, node.line, node.column)
            scene.warnings.append(f"{node.line}:{node.column}: {msg}")
    if not scene.models and not scene.lights:
        raise SceneError("scene needs at least one model or light", 1, 1)
    return scene


def load_scene(path: str | Path, strict: bool = True) -> Scene:
    path = Path(path)
    return build(parse(lex(path.read_text())), base_dir=path.parent, strict=strict)


def loads_scene(text: str, base_dir: str | Path | None = None,
                strict: bool = True) -> Scene:
    return build(parse(lex(text)), base_dir=base_dir, strict=strict)


def _fmt(v: float) -> str:
    return repr(float(v))


def _fmt_tuple(values) -> str:
    return "(" + ", ".join(_fmt(v) for v in values) + ")"


def serialize(scene: Scene) -> str:
    """Canonical text form: fixed block order, sorted keys, repr floats.

    Reparsing the output builds a structurally equal scene; serialization is
    byte-deterministic.
    """
    out: list[str] = []

    if scene.camera is not None:
        cam = scene.camera
        out.append("camera {")
        for key, val in sorted({
            "far": _fmt(cam.far),
            "fov": _fmt(cam.fov_y),
            "near": _fmt(cam.near),
            "pitch": _fmt(cam.pitch),
            "position": _fmt_tuple(cam.position),
            "yaw": _fmt(cam.yaw),
        }.items()):
            out.append(f"  {key}: {val};")
        out.append("}")

    for model in scene.models:
        out.append("model {")
        kind, ref = model.source
        entries = {
            kind: f'"{ref}"',
            "name": f'"{model.name}"',
            "position": _fmt_tuple(model.position),
            "rotation": _fmt_tuple(model.rotation),
            "scale": _fmt_tuple(model.scale),
            "static": "1" if model.static else "0",
        }
        for key, val in sorted(entries.items()):
            out.append(f"  {key}: {val};")
        mat = model.material
        out.append("  material {")
        for key, val in sorted({
            "ambient": _fmt(mat.ambient_str),
            "color": _fmt_tuple(mat.color),
            "diffuse": _fmt(mat.diffuse_str),
            "shininess": _fmt(mat.shininess),
            "specular": _fmt(mat.specular_str),
        }.items()):
            out.append(f"    {key}: {val};")
        out.append("  }")
        out.append("}")

    for light in scene.lights:
        out.append("pointlight {")
        for key, val in sorted({
            "attenuation": _fmt_tuple(
                (light.att_constant, light.att_linear, light.att_quadratic)),
            "color": _fmt_tuple(light.color),
            "position": _fmt_tuple(light.position),
        }.items()):
            out.append(f"  {key}: {val};")
        out.append("}")

    if scene.settings:
        out.append("settings {")
        for key in sorted(scene.settings):
            out.append(f"  {key}: {_fmt(scene.settings[key])};")
        out.append("}")

    return "\n".join(out) + ("\n" if out else "")


def scenes_equal(a: Scene, b: Scene) -> bool:
    """Structural equality used by round-trip tests."""
    if len(a.models) != len(b.models) or len(a.lights) != len(b.lights):
        return False
    for ma, mb in zip(a.models, b.models):
        if ma.name != mb.name or ma.source != mb.source or ma.static != mb.static:
            return False
        if not (np.array_equal(ma.position, mb.position)
                and np.array_equal(ma.scale, mb.scale)
                and np.array_equal(ma.rotation, mb.rotation)):
            return False
        x, y = ma.material, mb.material
        if not (np.array_equal(x.color, y.color)
                and x.ambient_str == y.ambient_str
                and x.diffuse_str == y.diffuse_str
                and x.specular_str == y.specular_str
                and x.shininess == y.shininess):
            return False
    for la, lb in zip(a.lights, b.lights):
        if not (np.array_equal(la.position, lb.position)
                and np.array_equal(la.color, lb.color)
                and (la.att_constant, la.att_linear, la.att_quadratic)
                == (lb.att_constant, lb.att_linear, lb.att_quadratic)):
            return False
    if (a.camera is None) != (b.camera is None):
        return False
    if a.camera is not None:
        ca, cb = a.camera, b.camera
        if not (np.array_equal(ca.position, cb.position)
                and (ca.yaw, ca.pitch, ca.fov_y, ca.near, ca.far)
                == (cb.yaw, cb.pitch, cb.fov_y, cb.near, cb.far)):
            return False
    return a.settings == b.settings

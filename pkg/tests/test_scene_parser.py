import math
import random

import numpy as np
import pytest

from voxelgi import scene_parser as sp


# --- independent lexer oracle ----------------------------------------------------

def lex_oracle(text):
    """Character-by-character scanner, no regular expressions."""
    singles = {"{": "LBRACE", "}": "RBRACE", "(": "LPAREN", ")": "RPAREN",
               ":": "COLON", ";": "SEMI", ",": "COMMA"}
    out = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        i = 0
        while i < len(line):
            ch = line[i]
            if ch in " \t\r":
                i += 1
                continue
            if ch == "/" and line[i:i + 2] == "//":
                break
            col = i + 1
            if ch in singles:
                out.append((singles[ch], ch, line_no, col))
                i += 1
                continue
            if ch == '"':
                j = i + 1
                while j < len(line) and line[j] != '"':
                    j += 1
                if j >= len(line):
                    raise ValueError(f"{line_no}:{col}: unterminated string")
                out.append(("STRING", line[i:j + 1], line_no, col))
                i = j + 1
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < len(line) and (line[j].isalnum() or line[j] == "_"):
                    j += 1
                out.append(("IDENT", line[i:j], line_no, col))
                i = j
                continue
            if ch.isdigit() or ch == "." or (ch in "+-"):
                j = i
                if line[j] in "+-":
                    j += 1
                digits = 0
                while j < len(line) and line[j].isdigit():
                    j += 1
                    digits += 1
                if j < len(line) and line[j] == ".":
                    j += 1
                    while j < len(line) and line[j].isdigit():
                        j += 1
                        digits += 1
                if digits == 0:
                    raise ValueError(f"{line_no}:{col}: bad number")
                if j < len(line) and line[j] in "eE":
                    k = j + 1
                    if k < len(line) and line[k] in "+-":
                        k += 1
                    exp_digits = 0
                    while k < len(line) and line[k].isdigit():
                        k += 1
                        exp_digits += 1
                    if exp_digits:
                        j = k
                if math.isinf(float(line[i:j])):
                    raise ValueError(f"{line_no}:{col}: non-finite number")
                out.append(("NUMBER", line[i:j], line_no, col))
                i = j
                continue
            raise ValueError(f"{line_no}:{col}: illegal {ch!r}")
    return out


# --- lex ---------------------------------------------------------------------------

def test_lex_empty_is_just_eof():
    tokens = sp.lex("")
    assert len(tokens) == 1 and tokens[0].kind == "EOF"


def test_lex_example_kinds_match_oracle():
    text = "pos: (1, -2.5e1);"
    got = [(t.kind, t.lexeme, t.line, t.column) for t in sp.lex(text)[:-1]]
    assert got == lex_oracle(text)
    kinds = [k for k, *_ in got]
    assert kinds == ["IDENT", "COLON", "LPAREN", "NUMBER", "COMMA", "NUMBER",
                     "RPAREN", "SEMI"]


def test_lex_illegal_character_position():
    with pytest.raises(sp.SceneError) as err:
        sp.lex("@")
    assert err.value.line == 1 and err.value.column == 1


def test_lex_comments_and_numbers():
    text = 'a { b: 1.5e-3; // trailing\n c: "file.obj"; }\n'
    got = [(t.kind, t.lexeme, t.line, t.column) for t in sp.lex(text)[:-1]]
    assert got == lex_oracle(text)


def test_lex_random_documents_match_oracle():
    rng = random.Random(4)
    pieces = ["ident", "x9_", "{", "}", "(", ")", ":", ";", ",", "1", "-2.5",
              "+.5", "3e8", "1.25e-3", '"str ing"', "//note", " ", "\t", "\n"]
    for _ in range(300):
        text = "".join(rng.choice(pieces) for _ in range(rng.randint(0, 40)))
        try:
            want = lex_oracle(text)
        except ValueError:
            continue
        got = [(t.kind, t.lexeme, t.line, t.column) for t in sp.lex(text)[:-1]]
        assert got == want, text


def test_detokenize_roundtrip_kinds():
    text = 'model { file: "a.obj"; position: (1, 2, 3); }'
    tokens = sp.lex(text)
    again = sp.lex(sp.detokenize(tokens))
    assert [t.kind for t in tokens] == [t.kind for t in again]
    assert [t.lexeme for t in tokens] == [t.lexeme for t in again]


# --- parse -------------------------------------------------------------------------

def test_parse_simple_block():
    tree = sp.parse(sp.lex("a { b: 1; }"))
    assert tree.name == "scene"
    (a,) = tree.children
    assert a.name == "a"
    (b,) = a.children
    assert b.name == "b" and b.value == 1.0


def test_parse_nested_blocks():
    tree = sp.parse(sp.lex("m { mat { c: (1, 0, 0); } }"))
    m = tree.children[0]
    mat = m.children[0]
    assert mat.name == "mat"
    assert mat.children[0].value == (1.0, 0.0, 0.0)


def test_parse_missing_value():
    with pytest.raises(sp.SceneError) as err:
        sp.parse(sp.lex("a { b: ; }"))
    assert "value" in str(err.value)


def test_parse_unbalanced_braces():
    with pytest.raises(sp.SceneError) as err:
        sp.parse(sp.lex("a { b: 1; "))
    assert "unbalanced" in str(err.value) or "brace" in str(err.value)


def test_parse_error_names_expectation():
    with pytest.raises(sp.SceneError) as err:
        sp.parse(sp.lex("a { b 1; }"))
    assert "expected" in str(err.value)


def test_node_children_xor_value():
    with pytest.raises(ValueError):
        sp.SyntaxNode("x", 1, 1, children=[], value=1.0)
    with pytest.raises(ValueError):
        sp.SyntaxNode("x", 1, 1)


# --- build -------------------------------------------------------------------------

def test_build_minimal_pointlight_defaults():
    scene = sp.loads_scene("pointlight { position: (0, 4, 0); }")
    assert len(scene.lights) == 1
    light = scene.lights[0]
    assert np.allclose(light.position, (0, 4, 0))
    assert np.allclose(light.color, (1, 1, 1))
    assert (light.att_constant, light.att_linear, light.att_quadratic) == (1.0, 0.09, 0.032)


def test_build_material_defaults():
    scene = sp.loads_scene('model { shape: "cube"; }')
    mat = scene.models[0].material
    assert np.allclose(mat.color, 0.8)
    assert (mat.ambient_str, mat.diffuse_str, mat.specular_str, mat.shininess) \
        == (0.1, 0.7, 0.2, 32.0)


def test_build_camera_defaults_fov():
    scene = sp.loads_scene("camera { position: (0, 0, 4); }\n"
                           "pointlight { position: (0, 1, 0); }")
    assert scene.camera.fov_y == 1.0


def test_build_wrong_arity():
    with pytest.raises(sp.SceneError) as err:
        sp.loads_scene('model { shape: "cube"; position: (1, 2); }')
    assert "3" in str(err.value)


def test_build_scale_accepts_scalar_or_triple():
    s1 = sp.loads_scene('model { shape: "cube"; scale: 2; }')
    assert np.allclose(s1.models[0].scale, (2, 2, 2))
    s3 = sp.loads_scene('model { shape: "cube"; scale: (1, 2, 3); }')
    assert np.allclose(s3.models[0].scale, (1, 2, 3))


def test_build_unknown_key_strict_vs_lenient():
    text = 'model { shape: "cube"; wobble: 3; }'
    with pytest.raises(sp.SceneError):
        sp.loads_scene(text)
    lenient = sp.loads_scene(text, strict=False)
    assert lenient.warnings and "wobble" in lenient.warnings[0]


def test_build_missing_mesh_file(tmp_path):
    with pytest.raises(sp.SceneError) as err:
        sp.loads_scene('model { file: "nope.obj"; }', base_dir=tmp_path)
    assert "not found" in str(err.value)


def test_build_mesh_file_loaded(tmp_path):
    obj = tmp_path / "tri.obj"
    obj.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    scene = sp.loads_scene(f'model {{ file: "tri.obj"; }}', base_dir=tmp_path)
    assert scene.models[0].mesh.triangle_count == 1


def test_build_needs_model_or_light():
    with pytest.raises(sp.SceneError):
        sp.loads_scene("camera { position: (0, 0, 1); }")


def test_build_settings_block():
    scene = sp.loads_scene(
        "pointlight { position: (0, 1, 0); }\n"
        "settings { shadow_str: 0.5; side_cones: 1; diffuse_aperture: 0.7; }")
    assert scene.settings == {"shadow_str": 0.5, "side_cones": 1.0,
                              "diffuse_aperture": 0.7}


def test_build_settings_rejects_unknown_and_invalid():
    with pytest.raises(sp.SceneError):
        sp.loads_scene("pointlight { position: (0,1,0); } settings { nope: 1; }")
    with pytest.raises(sp.SceneError):
        sp.loads_scene("pointlight { position: (0,1,0); } "
                       "settings { diffuse_aperture: 9; }")


def test_model_transform_composition():
    scene = sp.loads_scene(
        'model { shape: "cube"; position: (1, 0, 0); scale: 2; '
        'rotation: (0, 0, 0); }')
    m = scene.models[0].transform.model_matrix
    # scale then translate: corner (0.5, 0.5, 0.5) -> (2, 1, 1)
    from voxelgi.geometry import transform_point
    assert np.allclose(transform_point(m, (0.5, 0.5, 0.5)), (2, 1, 1))


# --- serialize / round-trip -----------------------------------------------------------

CORNELLISH = """
camera { position: (0, 0, 3.5); fov: 1.05; }
model {
  shape: "plane"; name: "floor"; position: (0, -1, 0); scale: (2, 1, 2);
  material { color: (0.9, 0.9, 0.9); ambient: 0.05; }
}
model {
  shape: "cube"; name: "box"; position: (0.3, -0.7, 0.1);
  scale: (0.5, 0.6, 0.5); rotation: (0, 0.4, 0); static: 1;
  material { color: (0.2, 0.4, 0.9); specular: 0.6; shininess: 24; }
}
pointlight { position: (0, 0.8, 0); color: (1, 0.95, 0.9); attenuation: (1, 0.1, 0.02); }
settings { shadow_str: 0.8; }
"""


def test_roundtrip_structural_equality():
    scene = sp.loads_scene(CORNELLISH)
    text = sp.serialize(scene)
    again = sp.loads_scene(text)
    assert sp.scenes_equal(scene, again)


def test_serialize_deterministic():
    scene = sp.loads_scene(CORNELLISH)
    assert sp.serialize(scene) == sp.serialize(scene)


def test_serialize_empty_scene_is_empty():
    assert sp.serialize(sp.Scene()) == ""


def test_serialize_double_roundtrip_is_stable():
    scene = sp.loads_scene(CORNELLISH)
    t1 = sp.serialize(scene)
    t2 = sp.serialize(sp.loads_scene(t1))
    assert t1 == t2


# --- fuzz --------------------------------------------------------------------------

def random_scene_text(rng: random.Random) -> str:
    parts = []
    n_models = rng.randint(0, 3)
    n_lights = rng.randint(0 if n_models else 1, 3)
    for i in range(n_models):
        mat = ""
        if rng.random() < 0.7:
            mat = (f'material {{ color: ({rng.uniform(0,1):.3f}, '
                   f'{rng.uniform(0,1):.3f}, {rng.uniform(0,1):.3f}); '
                   f'shininess: {rng.randint(1, 128)}; }}')
        shape = rng.choice(["cube", "plane", "quad"])
        parts.append(
            f'model {{ shape: "{shape}"; name: "m{i}"; '
            f'position: ({rng.uniform(-5,5):.4f}, {rng.uniform(-5,5):.4f}, '
            f'{rng.uniform(-5,5):.4f}); scale: {rng.choice(["1", "(1, 2, 1)"])}; '
            f'static: {rng.randint(0,1)}; {mat} }}')
    for _ in range(n_lights):
        parts.append(
            f'pointlight {{ position: ({rng.uniform(-5,5):.4f}, '
            f'{rng.uniform(0,5):.4f}, {rng.uniform(-5,5):.4f}); '
            f'color: ({rng.uniform(0,1):.3f}, {rng.uniform(0,1):.3f}, '
            f'{rng.uniform(0,1):.3f}); }}')
    if rng.random() < 0.4:
        parts.append(f'camera {{ position: (0, 0, {rng.uniform(1,6):.3f}); '
                     f'yaw: {rng.uniform(-1,1):.3f}; }}')
    if rng.random() < 0.4:
        parts.append(f'settings {{ shadow_str: {rng.uniform(0,2):.3f}; }}')
    return "\n".join(parts)


def test_fuzz_roundtrip_small():
    rng = random.Random(1234)
    for _ in range(100):
        text = random_scene_text(rng)
        scene = sp.loads_scene(text)
        again = sp.loads_scene(sp.serialize(scene))
        assert sp.scenes_equal(scene, again)


def test_fuzz_malformed_produces_located_errors():
    rng = random.Random(77)
    mutations = [
        lambda s: s.replace("{", "", 1),
        lambda s: s.replace("}", "", 1),
        lambda s: s.replace(";", "", 1),
        lambda s: s + "@",
        lambda s: s.replace(":", "::", 1),
        lambda s: "junk " + s,
    ]
    for _ in range(100):
        text = random_scene_text(rng)
        broken = rng.choice(mutations)(text)
        try:
            sp.loads_scene(broken)
        except sp.SceneError as exc:
            assert exc.line >= 1 and exc.column >= 1
        # silently-still-valid mutations are fine; crashes are not


def test_parse_rejects_mismatched_brace_depth_fuzz():
    rng = random.Random(9)
    for _ in range(200):
        depth = 0
        toks = []
        for _ in range(rng.randint(1, 30)):
            t = rng.choice(["a {", "}", "k: 1;"])
            if t == "}":
                depth -= 1
            elif t.endswith("{"):
                depth += 1
            toks.append(t)
        text = " ".join(toks)
        if depth == 0 and min_depth_ok(text):
            continue
        with pytest.raises(sp.SceneError):
            sp.parse(sp.lex(text))


def min_depth_ok(text):
    depth = 0
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if depth < 0:
            return False
    return depth == 0

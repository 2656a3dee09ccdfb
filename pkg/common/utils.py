import ast
import math
import os
import re

from common.errors import ConfigurationError

# "<number>e" means "<number> times Euler's number"; "1e-3" stays a float literal.
_EULER_SUFFIX = re.compile(r"(?<![\w.])(\d+(?:\.\d*)?|\.\d+)e(?![\w+\-])")

_NAMES = {"e": math.e, "pi": math.pi}


def _rewrite_euler_suffix(text):
    return _EULER_SUFFIX.sub(lambda m: f"({m.group(1)}*e)", text)


def _evaluate_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        operand = _evaluate_node(node.operand)
        return -operand if isinstance(node.op, ast.USub) else operand
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
        left, right = _evaluate_node(node.left), _evaluate_node(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if right == 0:
            raise ConfigurationError("division by zero in numeric expression")
        return left / right
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_evaluate_node(item) for item in node.elts]
    raise ConfigurationError(f"unsupported element in numeric expression: {ast.dump(node)}")


def evaluate_expression(text):
    """
    Evaluate a numeric config value.

    Accepts decimal literals, the constants e and pi, the Euler suffix
    ("-20e" is -20*e), unary minus, + - * / and bracketed lists.
    """
    source = _rewrite_euler_suffix(str(text).strip())
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as e:
        raise ConfigurationError(f"cannot parse numeric expression '{text}': {e.msg}")
    return _evaluate_node(tree.body)


def parse_call(text):
    """
    Parse a generator expression such as "bump(center=0, scale=20, amplitude=-20e)".

    Returns (name, positional_args, keyword_args) with every argument evaluated.
    """
    source = _rewrite_euler_suffix(str(text).strip())
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as e:
        raise ConfigurationError(f"cannot parse initial data expression '{text}': {e.msg}")

    call = tree.body
    if isinstance(call, ast.Name):
        return call.id, [], {}
    if not isinstance(call, ast.Call) or not isinstance(call.func, ast.Name):
        raise ConfigurationError(f"initial data must look like name(arg=value, ...), got '{text}'")

    args = [_evaluate_node(arg) for arg in call.args]
    kwargs = {kw.arg: _evaluate_node(kw.value) for kw in call.keywords}
    return call.func.id, args, kwargs


def format_call(name, kwargs):
    """Inverse of parse_call for keyword-only calls (full float precision)."""
    parts = [f"{key}={_format_value(kwargs[key])}" for key in sorted(kwargs)]
    return f"{name}({', '.join(parts)})"


def _format_value(value):
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(item) for item in value) + "]"
    return repr(value)


def sort_keys(value):
    """Recursively sort dictionary keys so serialized documents are deterministic."""
    if isinstance(value, dict):
        return {key: sort_keys(value[key]) for key in sorted(value.keys())}
    elif isinstance(value, list):
        return [sort_keys(item) for item in value]
    else:
        return value


def flatten(mapping, prefix=""):
    """Flatten nested dicts into dotted keys."""
    flat = {}
    for key, value in mapping.items():
        full_key = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, prefix=f"{full_key}."))
        else:
            flat[full_key] = value
    return flat


def format_key_values(mapping):
    """Flat key=value document, keys sorted, one entry per line."""
    flat = flatten(sort_keys(mapping))
    lines = []
    for key in sorted(flat):
        value = flat[key]
        if isinstance(value, (list, tuple)):
            value = ",".join(str(item) for item in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_text_atomic(path, text):
    """
    Writes text to path via a .tmp file + os.replace so readers never see
    a half-written document.
    """
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "w") as f:
        f.write(text)
    os.replace(tmp_path, path)
    return path

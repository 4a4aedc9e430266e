"""Weight persistence: a self-describing JSON text document.

Top-level keys: ``format`` ("advcraft-weights"), ``version`` (1),
``input_shape`` and ``layers``.  Each layer entry carries ``kind`` plus its
parameters; convolution and dense layers additionally carry flat row-major
``weights`` and ``biases`` arrays.  Floats are written with 17 significant
digits, which round-trips IEEE-754 doubles exactly, so
``load_weights(save_weights(net))`` reproduces every coefficient bit.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import IntegrityError, ParseError, UnsupportedVersionError
from .nn import Conv, Dense, MaxPool, Network, Relu, Softmax

FORMAT_NAME = "advcraft-weights"
FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _layer_document(spec, param):
    if isinstance(spec, Conv):
        head = (
            f'{{"kind": "conv", "height": {spec.height}, "width": {spec.width}, '
            f'"filters": {spec.filters}'
        )
    elif isinstance(spec, MaxPool):
        return f'{{"kind": "max-pool", "size": {spec.size}}}'
    elif isinstance(spec, Dense):
        head = f'{{"kind": "dense", "units": {spec.units}'
    elif isinstance(spec, Relu):
        return '{"kind": "relu"}'
    elif isinstance(spec, Softmax):
        return '{"kind": "softmax"}'
    else:
        raise IntegrityError(f"cannot serialize layer {spec!r}")
    w, b = param
    weights = ", ".join(_fmt(v) for v in w.ravel())
    biases = ", ".join(_fmt(v) for v in b.ravel())
    return f'{head}, "weights": [{weights}], "biases": [{biases}]}}'


def save_weights(net: Network, path) -> None:
    """Atomically write ``net`` to ``path`` (temp file + rename)."""
    shape = ", ".join(str(n) for n in net.input_shape)
    lines = [
        "{",
        f'  "format": "{FORMAT_NAME}",',
        f'  "version": {FORMAT_VERSION},',
        f'  "input_shape": [{shape}],',
        '  "layers": [',
    ]
    entries = [
        "    " + _layer_document(spec, param)
        for spec, param in zip(net.layers, net.params)
    ]
    lines.append(",\n".join(entries))
    lines.append("  ]")
    lines.append("}")
    text = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_layer(entry, index):
    if not isinstance(entry, dict) or "kind" not in entry:
        raise IntegrityError(f"layer {index}: missing 'kind'")
    kind = entry["kind"]
    if kind == "conv":
        spec = Conv(int(entry["height"]), int(entry["width"]), int(entry["filters"]))
    elif kind == "max-pool":
        return MaxPool(int(entry["size"])), None
    elif kind == "dense":
        spec = Dense(int(entry["units"]))
    elif kind == "relu":
        return Relu(), None
    elif kind == "softmax":
        return Softmax(), None
    else:
        raise IntegrityError(f"layer {index}: unknown kind '{kind}'")
    try:
        w = np.asarray(entry["weights"], dtype=np.float64)
        b = np.asarray(entry["biases"], dtype=np.float64)
    except KeyError as err:
        raise IntegrityError(f"layer {index}: missing coefficients ({err})") from err
    return spec, (w, b)


def load_weights(path) -> Network:
    with open(path, "r") as handle:
        text = handle.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(
            f"malformed weight file at byte {err.pos}: {err.msg}", offset=err.pos
        ) from err
    if not isinstance(doc, dict):
        raise ParseError("weight file is not a JSON object", offset=0)
    if doc.get("format") != FORMAT_NAME:
        raise ParseError(
            f"not an {FORMAT_NAME} document (format={doc.get('format')!r})", offset=0
        )
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"weight file version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    if "input_shape" not in doc or "layers" not in doc:
        raise IntegrityError("weight file lacks input_shape or layers")
    input_shape = tuple(int(n) for n in doc["input_shape"])
    layers, flat_params = [], []
    for i, entry in enumerate(doc["layers"]):
        spec, param = _parse_layer(entry, i)
        layers.append(spec)
        flat_params.append(param)

    # Reshape flat coefficient arrays against the declared architecture;
    # any disagreement with the header is an integrity failure.
    shape = input_shape
    params = []
    from .nn import output_shape  # local import avoids a cycle at module load

    for i, (spec, param) in enumerate(zip(layers, flat_params)):
        try:
            next_shape = output_shape(spec, shape)
        except Exception as err:
            raise IntegrityError(f"layer {i}: {err}") from err
        if param is not None:
            w, b = param
            if isinstance(spec, Conv):
                expect = (spec.height, spec.width, shape[2], spec.filters)
            else:
                expect = (int(np.prod(shape)), spec.units)
            if w.size != int(np.prod(expect)) or b.size != next_shape[-1]:
                raise IntegrityError(
                    f"layer {i} ({spec.kind}): coefficient count {w.size}/{b.size} "
                    f"does not match declared shapes"
                )
            params.append((w.reshape(expect), b.reshape(next_shape[-1])))
        else:
            params.append(None)
        shape = next_shape
    try:
        return Network(input_shape, layers, params)
    except Exception as err:
        raise IntegrityError(str(err)) from err

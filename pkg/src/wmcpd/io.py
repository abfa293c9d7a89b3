"""File formats. JSON is written with sorted-free fixed key order and repr floats."""
import json
from pathlib import Path

from .attacks_eval import GroundTruth
from .toy_lm import TokenModel, TokenSequence
from .watermark import KeySequence


def dump_json(obj, path):
    text = json.dumps(obj, indent=1) + "\n"
    if path in (None, "-"):
        print(text, end="")
    else:
        Path(path).write_text(text)


def load_json(path):
    return json.loads(Path(path).read_text())


def text_to_dict(text):
    return {"tokens": [int(t) for t in text.tokens],
            "watermarked": [bool(f) for f in text.watermarked]}


def text_from_dict(d):
    return TokenSequence(d["tokens"], d.get("watermarked"))


def save_text(text, path):
    dump_json(text_to_dict(text), path)


def load_text(path):
    return text_from_dict(load_json(path))


def save_model(model, path):
    dump_json(model.to_dict(), path)


def load_model(path):
    return TokenModel.from_dict(load_json(path))


def save_keys(keys, path):
    dump_json(keys.to_dict(), path)


def load_keys(path):
    return KeySequence.from_dict(load_json(path))


def load_truth(path):
    return GroundTruth(**load_json(path))

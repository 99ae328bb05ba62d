#!/usr/bin/env python3
"""Convert a Hugging Face GPT-2 or Llama checkpoint into an ECWA weight archive.

    python3 tools/convert_checkpoint.py gpt2 /path/to/gpt2 gpt2.ecwa
    python3 tools/convert_checkpoint.py llama /path/to/llama llama.ecwa --dtype f32

The source may be a local model directory or a hub id (if the hub is reachable).
Dense weights are written [in, out]. Llama q/k projections are permuted from the
half-split rotary layout to adjacent pairs.
"""

import argparse
import struct
import sys

import numpy as np

MAGIC = b"ECWA"
VERSION = 1
DTYPES = {"f32": (0, "<f4"), "f64": (1, "<f8")}


def write_ecwa(path, arrays, dtype="f64"):
    code, np_dtype = DTYPES[dtype]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(arrays)))
        for name in sorted(arrays):
            a = np.ascontiguousarray(arrays[name], dtype=np.float64)
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<BI", code, a.ndim))
            f.write(struct.pack("<%dQ" % a.ndim, *a.shape))
            f.write(a.astype(np_dtype).tobytes())


def read_ecwa(path):
    out = {}
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError("%s: not a weight archive" % path)
        version, count = struct.unpack("<IQ", f.read(12))
        if version != VERSION:
            raise ValueError("%s: unsupported version %d" % (path, version))
        for _ in range(count):
            (n,) = struct.unpack("<I", f.read(4))
            name = f.read(n).decode("utf-8")
            code, ndim = struct.unpack("<BI", f.read(5))
            shape = struct.unpack("<%dQ" % ndim, f.read(8 * ndim))
            np_dtype = "<f4" if code == 0 else "<f8"
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(size * np.dtype(np_dtype).itemsize), dtype=np_dtype)
            out[name] = data.astype(np.float64).reshape(shape)
    return out


def _numpy(t):
    return t.detach().to("cpu").double().numpy()


def convert_gpt2(state_dict):
    """GPT-2 Conv1D weights are already [in, out]; only the prefix changes."""
    out = {}
    for key, value in state_dict.items():
        name = key[len("transformer."):] if key.startswith("transformer.") else key
        if name.startswith("lm_head.") or name.endswith(".attn.bias") or name.endswith(".attn.masked_bias"):
            continue
        out[name] = _numpy(value)
    return out


def _half_split_to_pairs(w, n_heads, head_dim):
    # w: [out, in] with out = n_heads * head_dim. Row i of a head pairs with
    # row i + head_dim/2; adjacent-pair layout wants them at 2i and 2i+1.
    half = head_dim // 2
    order = []
    for h in range(n_heads):
        base = h * head_dim
        for i in range(half):
            order.extend([base + i, base + half + i])
    return w[order, :]


def convert_llama(state_dict, n_heads, n_kv_heads, rope_base=None):
    out = {}
    hidden = None
    for key, value in state_dict.items():
        name = key[len("model."):] if key.startswith("model.") else key
        if name.startswith("lm_head."):
            continue
        a = _numpy(value)
        if name.endswith("rotary_emb.inv_freq"):
            out["rotary.inv_freq"] = a
            continue
        if name.endswith("_proj.weight"):
            if name.endswith("self_attn.q_proj.weight"):
                hidden = a.shape[1]
                a = _half_split_to_pairs(a, n_heads, a.shape[0] // n_heads)
            elif name.endswith("self_attn.k_proj.weight"):
                a = _half_split_to_pairs(a, n_kv_heads, a.shape[0] // n_kv_heads)
            a = a.T
        out[name] = a
    if "rotary.inv_freq" not in out and rope_base is not None and hidden is not None:
        head_dim = hidden // n_heads
        out["rotary.inv_freq"] = rope_base ** (-np.arange(0, head_dim, 2, dtype=np.float64) / head_dim)
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("family", choices=["gpt2", "llama"])
    p.add_argument("source", help="model directory or hub id")
    p.add_argument("output", help="archive to write")
    p.add_argument("--dtype", choices=sorted(DTYPES), default="f32")
    args = p.parse_args(argv)

    from transformers import AutoConfig, AutoModel

    config = AutoConfig.from_pretrained(args.source)
    model = AutoModel.from_pretrained(args.source)
    sd = model.state_dict()
    if args.family == "gpt2":
        arrays = convert_gpt2(sd)
    else:
        kv = getattr(config, "num_key_value_heads", None) or config.num_attention_heads
        arrays = convert_llama(sd, config.num_attention_heads, kv, getattr(config, "rope_theta", 10000.0))
    write_ecwa(args.output, arrays, args.dtype)
    print("wrote %d tensors to %s" % (len(arrays), args.output))
    return 0


if __name__ == "__main__":
    sys.exit(main())

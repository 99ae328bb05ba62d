#!/usr/bin/env python3
"""Forecast parity against the transformers reference blocks.

Builds small randomly initialised GPT-2 and Llama models, converts them with
tools/convert_checkpoint.py, adds random input/output layers, and compares the
shared library's predictions with the same pipeline run through transformers.

usage: hf_parity.py <libethcast.so> <source dir>
"""

import ctypes
import os
import sys
import tempfile

import numpy as np
import torch

SEQ, PATCH, STRIDE, PRED = 32, 8, 4, 2
EPS = 1e-5


def load_lib(path):
    lib = ctypes.CDLL(path)
    vp = ctypes.c_void_p
    lib.ethcast_context_create.argtypes = [ctypes.POINTER(vp)]
    lib.ethcast_context_destroy.argtypes = [vp]
    lib.ethcast_set_option.argtypes = [vp, ctypes.c_char_p, ctypes.c_char_p]
    lib.ethcast_last_error.argtypes = [vp]
    lib.ethcast_last_error.restype = ctypes.c_char_p
    lib.ethcast_model_create.argtypes = [vp, ctypes.POINTER(vp)]
    lib.ethcast_model_load_checkpoint.argtypes = [vp, vp, ctypes.c_char_p]
    lib.ethcast_model_destroy.argtypes = [vp]
    lib.ethcast_model_predict.argtypes = [vp, vp, ctypes.POINTER(ctypes.c_double), ctypes.c_size_t,
                                          ctypes.POINTER(ctypes.c_double)]
    return lib


def library_predict(lib, options, archive, windows):
    ctx = ctypes.c_void_p()
    assert lib.ethcast_context_create(ctypes.byref(ctx)) == 0

    def check(status):
        if status != 0:
            raise RuntimeError(lib.ethcast_last_error(ctx).decode())

    for k, v in options.items():
        check(lib.ethcast_set_option(ctx, k.encode(), str(v).encode()))
    model = ctypes.c_void_p()
    check(lib.ethcast_model_create(ctx, ctypes.byref(model)))
    check(lib.ethcast_model_load_checkpoint(ctx, model, archive.encode()))
    x = np.ascontiguousarray(windows, dtype=np.float64)
    out = np.zeros((x.shape[0], PRED), dtype=np.float64)
    check(lib.ethcast_model_predict(ctx, model, x.ctypes.data_as(ctypes.POINTER(ctypes.c_double)), x.shape[0],
                                    out.ctypes.data_as(ctypes.POINTER(ctypes.c_double))))
    lib.ethcast_model_destroy(model)
    lib.ethcast_context_destroy(ctx)
    return out


def patches(windows):
    mean = windows.mean(axis=1, keepdims=True)
    std = np.sqrt(windows.var(axis=1, keepdims=True) + EPS)
    normed = (windows - mean) / std
    padded_len = max(SEQ + STRIDE, PATCH)
    pad = np.repeat(normed[:, -1:], padded_len - SEQ, axis=1)
    full = np.concatenate([normed, pad], axis=1)
    starts = range(0, padded_len - PATCH + 1, STRIDE)
    return np.stack([full[:, s:s + PATCH] for s in starts], axis=1), mean, std


def reference_predict(backbone, head, windows):
    p, mean, std = patches(windows)
    emb = p @ head["in_layer.weight"] + head["in_layer.bias"]
    with torch.no_grad():
        h = backbone(inputs_embeds=torch.from_numpy(emb)).last_hidden_state.numpy()
    flat = h.reshape(h.shape[0], -1)
    y = flat @ head["out_layer.weight"] + head["out_layer.bias"]
    return y * std + mean


def random_head(rng, hidden, n_patches):
    return {
        "in_layer.weight": rng.normal(0, 0.3, (PATCH, hidden)),
        "in_layer.bias": rng.normal(0, 0.1, hidden),
        "out_layer.weight": rng.normal(0, 0.1, (n_patches * hidden, PRED)),
        "out_layer.bias": rng.normal(0, 0.1, PRED),
    }


def main():
    lib_path, source = sys.argv[1], sys.argv[2]
    sys.path.insert(0, os.path.join(source, "tools"))
    import convert_checkpoint as cc
    from transformers import GPT2Config, GPT2Model, LlamaConfig, LlamaModel

    torch.manual_seed(0)
    rng = np.random.default_rng(0)
    lib = load_lib(lib_path)
    windows = 100.0 + np.cumsum(rng.normal(0, 1, (5, SEQ)), axis=1)
    n_patches = (max(SEQ + STRIDE, PATCH) - PATCH) // STRIDE + 1
    failures = 0

    cases = []
    g = GPT2Config(n_layer=2, n_embd=16, n_head=4, n_positions=16, n_inner=32, vocab_size=11,
                   activation_function="gelu_new", layer_norm_epsilon=EPS, resid_pdrop=0.0, embd_pdrop=0.0,
                   attn_pdrop=0.0)
    gpt2 = GPT2Model(g).double().eval()
    with torch.no_grad():
        for name, p in gpt2.named_parameters():
            if name.endswith("bias") or "ln_" in name:
                p.add_(torch.randn_like(p) * 0.1)
    cases.append(("gpt2", gpt2, cc.convert_gpt2(gpt2.state_dict()),
                  {"model.kind": "gpt2", "model.hidden": 16, "model.n_heads": 4, "model.ffn_dim": 32,
                   "model.max_positions": 16}, 1e-9))

    l = LlamaConfig(num_hidden_layers=2, hidden_size=16, num_attention_heads=4, num_key_value_heads=2,
                    intermediate_size=24, max_position_embeddings=16, vocab_size=11, rms_norm_eps=EPS,
                    rope_theta=100.0, attention_bias=False, mlp_bias=False)
    llama = LlamaModel(l).double().eval()
    with torch.no_grad():
        for name, p in llama.named_parameters():
            if "norm" in name:
                p.add_(torch.randn_like(p) * 0.1)
    sd = {k: v for k, v in llama.state_dict().items()}
    cases.append(("llama", llama, cc.convert_llama(sd, 4, 2, rope_base=100.0),
                  {"model.kind": "llama", "model.hidden": 16, "model.n_heads": 4, "model.n_kv_groups": 2,
                   "model.ffn_dim": 24, "model.max_positions": 16, "model.rope_base": 100.0},
                  1e-5))  # the reference computes rotary angles in float32

    with tempfile.TemporaryDirectory() as tmp:
        for label, backbone, arrays, options, tol in cases:
            head = random_head(rng, 16, n_patches)
            arrays = dict(arrays)
            arrays.update(head)
            for unused in ("wte.weight", "embed_tokens.weight"):
                arrays.pop(unused, None)
            path = os.path.join(tmp, label + ".ecwa")
            cc.write_ecwa(path, arrays, "f64")
            if cc.read_ecwa(path).keys() != arrays.keys():
                print("%s: archive round trip lost tensors" % label)
                failures += 1
            opts = dict(options)  # kind first; it selects the preset shapes
            opts.update({"model.n_layers": 2, "model.patch_len": PATCH, "model.stride": STRIDE, "model.norm_eps": EPS,
                         "data.seq_len": SEQ, "data.pred_len": PRED, "model.freeze": "full"})
            opts.update(options)
            got = library_predict(lib, opts, path, windows)
            want = reference_predict(backbone, head, windows)
            diff = float(np.max(np.abs(got - want)))
            scale = float(np.max(np.abs(want)))
            ok = diff <= tol * max(1.0, scale)
            print("%s parity: max |diff| %.3g over %d forecasts (%s)" % (label, diff, got.size, "ok" if ok else "FAIL"))
            failures += 0 if ok else 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())

"""Independent oracle for the toy sample trace.

Recomputes S-MBU per pass and the dynamic-batching aggregate with exact
rationals straight from the descriptor and trace text, then writes the golden
file the CLI test compares against. Run from the repository root.
"""
import json
from fractions import Fraction

PEAK_BW = Fraction(100) * 10**9  # bytes/s
BYTES_PER_PARAM = 2  # fp16

desc = json.load(open("models/toy-moe.json"))
always = desc["params_embed"] + sum(
    desc["params_attn_layer"] + (desc["params_router"] if moe else desc["params_dense_ffn"])
    for moe in desc["moe_layer_mask"]
)

passes = []
for line in open("traces/toy-sample.trace"):
    line = line.strip()
    if not line or line.startswith("#"):
        continue
    pid, phase, batch, tokens, lat, kv, acts = line.split(",")
    routed = sum(bin(int(h, 16)).count("1") for h in (a.split(":")[1] for a in acts.split(";")))
    params = always + routed * desc["params_expert"]
    nbytes = Fraction(params * BYTES_PER_PARAM + int(kv))
    seconds = Fraction(lat)
    passes.append((int(pid), nbytes, seconds))

golden = {
    "model": "models/toy-moe.json",
    "trace": "traces/toy-sample.trace",
    "precision": "fp16",
    "peak_bandwidth_gbps": 100,
    "per_pass_s_mbu": [float(b / s / PEAK_BW) for _, b, s in passes],
    "per_pass_bytes": [float(b) for _, b, _ in passes],
    "aggregate_s_mbu": float(sum(b for _, b, _ in passes) / sum(s for _, _, s in passes) / PEAK_BW),
}
with open("traces/toy-sample.golden.json", "w") as f:
    json.dump(golden, f, indent=2)
    f.write("\n")
print(json.dumps(golden, indent=2))

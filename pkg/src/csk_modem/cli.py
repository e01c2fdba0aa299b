"""csk-modem command line: constellation export, tx/channel/rx, training,
trials, sweeps, leave-one-out evaluation, and report rendering."""

import argparse
import json
import os
import sys

import numpy as np

from . import channel as ch
from . import phy_rx as rx
from . import phy_tx as tx
from .colorspace import constellation_rows, default_vertices, make_constellation
from .config import load_config, parse_layout_file
from .errors import CskModemError
from .harness import (
    SweepSpec,
    TrialConfig,
    dataset_features,
    generate_dataset,
    leave_one_out,
    load_dataset,
    load_results_csv,
    plot_ber,
    run_sweep,
    run_trial,
    text_to_bits,
    write_results_csv,
)
from .harness.datasets import trial_config_to_dict
from .neural import TrainConfig, load_model, save_model, train


def _common(sub):
    sub.add_argument("--seed", type=int, default=None, help="base RNG seed")
    sub.add_argument("--config", default=None, help="TOML config file")
    sub.add_argument("--out", default=None, help="output file or directory")


def _load(args):
    """(TrialConfig, TrainConfig, seed) from --config/--seed with defaults."""
    if args.config:
        conf = load_config(args.config)
        trial, train_cfg, seed = conf["trial"], conf["train"], conf["seed"]
    else:
        trial, train_cfg, seed = TrialConfig(), TrainConfig(), None
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    return trial, train_cfg, 0 if seed is None else seed


def _require_out(args, what="--out"):
    if not args.out:
        sys.exit(f"error: {what} is required")
    return args.out


def _payload_bits(args) -> str:
    if args.payload_bits:
        return args.payload_bits
    if args.payload_hex:
        h = args.payload_hex.replace(" ", "")
        return bin(int(h, 16))[2:].zfill(4 * len(h))
    return text_to_bits(args.payload_text)


# ---------------------------------------------------------------------------


def cmd_constellation(args):
    c = make_constellation(args.order, default_vertices())
    out = _require_out(args)
    with open(out, "w") as f:
        f.write("index,x,y,p_r,p_g,p_b,bits\n")
        for i, x, y, pr, pg, pb, bits in constellation_rows(c):
            f.write(f"{i},{x!r},{y!r},{pr!r},{pg!r},{pb!r},{bits}\n")
    print(f"wrote {c.order} constellation points to {out}")


def cmd_tx(args):
    trial, _, _ = _load(args)
    layout = parse_layout_file(args.layout) if args.layout else trial.layout
    verts = default_vertices()
    c = make_constellation(args.order, verts)
    anchor_c = c if trial.anchor_order == args.order else make_constellation(
        trial.anchor_order, verts
    )
    symbols, pad = tx.bits_to_symbols(_payload_bits(args), c)
    pkt = tx.frame_packet(symbols, layout, c, anchor_c)
    wave = tx.packet_to_waveform(pkt, args.baud)
    out = _require_out(args)
    e = wave.efficiency
    with open(out, "w") as f:
        f.write(
            f"# baud_hz={wave.baud_hz!r} e_r={e.e_r!r} e_g={e.e_g!r} e_b={e.e_b!r}"
            f" order={args.order} anchor_order={trial.anchor_order} pad_count={pad}\n"
        )
        f.write("slot,kind,symbol,p_r,p_g,p_b\n")
        for slot, kind, sym, pr, pg, pb in tx.waveform_rows(wave):
            f.write(f"{slot},{kind},{sym},{pr!r},{pg!r},{pb!r}\n")
    print(f"wrote {wave.n_slots} slots to {out}")


def _read_header(path) -> dict:
    with open(path) as f:
        first = f.readline()
    if not first.startswith("#"):
        return {}
    out = {}
    for tok in first[1:].split():
        k, _, v = tok.partition("=")
        out[k] = v
    return out


def _read_waveform(path):
    head = _read_header(path)
    rows = np.genfromtxt(
        path, delimiter=",", skip_header=2, dtype=None, encoding="utf-8",
        names=["slot", "kind", "symbol", "p_r", "p_g", "p_b"],
    )
    rows = np.atleast_1d(rows)
    duty = np.stack([rows["p_r"], rows["p_g"], rows["p_b"]], axis=1)
    e = tx.EfficiencyTriple(float(head["e_r"]), float(head["e_g"]), float(head["e_b"]))
    powers = duty / e.as_array()
    kinds = tuple(tx.SlotKind(k) for k in rows["kind"])
    wave = tx.PowerWaveform(
        baud_hz=float(head["baud_hz"]), powers=powers, samples=duty, efficiency=e,
        slot_kinds=kinds, slot_symbols=tuple(int(s) for s in rows["symbol"]),
    )
    return wave, head


def cmd_channel(args):
    trial, _, seed = _load(args)
    if args.packets:
        out = _require_out(args, "--out (dataset directory)")
        generate_dataset(trial, args.packets, seed, out)
        print(f"wrote {args.packets} packets to {out}")
        return
    if not args.waveform:
        sys.exit("error: --waveform (or --packets) is required")
    wave, head = _read_waveform(args.waveform)
    cfg = trial.channel_config(seed)
    trace = ch.propagate(wave, cfg, pad_slots=trial.pad_slots)
    out = _require_out(args)
    n_payload = sum(1 for k in wave.slot_kinds if k is tx.SlotKind.PAYLOAD)
    with open(out, "w") as f:
        f.write(
            f"# fs_hz={trace.fs_hz!r} full_scale_v={trace.full_scale_v!r}"
            f" adc_bits={trace.adc_bits} baud_hz={wave.baud_hz!r}"
            f" payload_slots={n_payload} order={head.get('order', trial.order)}"
            f" anchor_order={head.get('anchor_order', trial.anchor_order)}"
            f" pad_count={head.get('pad_count', 0)}\n"
        )
        np.savetxt(f, trace.codes, fmt="%d", delimiter=",")
    print(f"wrote {trace.n_cells}x{trace.n_samples} ADC codes to {out}")


def _read_trace(path):
    head = _read_header(path)
    codes = np.loadtxt(path, dtype=np.int64, delimiter=",", skiprows=1, ndmin=2)
    bits = int(head["adc_bits"])
    fs = float(head["fs_hz"])
    full_scale = float(head["full_scale_v"])
    volts = codes * (full_scale / (2**bits - 1))
    return ch.AdcTrace(fs, codes, volts, volts, full_scale, bits), head


def cmd_rx(args):
    trial, _, _ = _load(args)
    trace, head = _read_trace(args.trace)
    layout = parse_layout_file(args.layout) if args.layout else trial.layout
    order = args.order or int(head["order"])
    anchor_order = int(head.get("anchor_order", trial.anchor_order))
    baud = args.baud or float(head["baud_hz"])
    n_payload = args.payload_slots or int(head["payload_slots"])
    pad = int(head.get("pad_count", 0))
    verts = default_vertices()
    c = make_constellation(order, verts)
    anchor_c = c if anchor_order == order else make_constellation(anchor_order, verts)

    try:
        start = rx.detect_preamble(trace, baud, layout, c)
        n_slots = layout.total_slots(n_payload)
        windows = rx.segment(trace, start, n_slots, trace.fs_hz, baud)
        anchors = rx.extract_anchors(windows, layout, anchor_c, trace.full_scale_v)
        span = rx.payload_slot_range(layout, n_payload)
        pw = [windows[i] for i in span]
        if args.decoder == "ls":
            H = rx.calibrate_H(anchors)
            symbols = [rx.ls_decode(w, H, c) for w in pw]
        else:
            from .harness.trials import anchor_features, raw_features
            from .neural import predict

            model = load_model(args.model) if args.model else None
            if model is None:
                sys.exit("error: --model is required for ml decoders")
            feats = (
                raw_features(pw) if args.decoder == "ml_raw"
                else anchor_features(pw, anchors)
            )
            idx, _ = predict(model, feats)
            symbols = [int(i) for i in idx]
    except CskModemError as exc:
        sys.exit(f"decode failed: {type(exc).__name__}: {exc}")

    bits = rx.symbols_to_bits(symbols, c, pad)
    result = {"start_sample": start, "symbols": symbols, "bits": bits}
    if args.out:
        with open(args.out, "w") as f:
            json.dump(result, f, indent=1)
            f.write("\n")
    print(json.dumps(result))


def cmd_train(args):
    _, train_cfg, seed = _load(args)
    if args.seed is not None:
        train_cfg.seed = args.seed
    records = load_dataset(args.dataset)
    batch = dataset_features(records, args.mode)
    classes = records[0].config.order
    model, log = train(batch, train_cfg, classes=classes)
    out = _require_out(args)
    save_model(model, out)
    best = log.best_val_loss
    print(
        f"trained {args.mode} model on {len(batch)} windows"
        f" ({len(log.epochs)} epochs, best val loss {best:.4g}) -> {out}"
    )


def cmd_trial(args):
    trial, train_cfg, seed = _load(args)
    model = load_model(args.model) if args.model else None
    result = run_trial(trial, args.decoder, seed, model=model)
    payload = {
        "decoder": result.decoder,
        "seed": result.seed,
        "ber": result.ber,
        "n_bits": result.n_bits,
        "n_errors": result.n_errors,
        "sync_ok": result.sync_ok,
        "error": result.error,
        "wall_ms": result.wall_ms,
        "config": result.config,
    }
    if args.out:
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=1)
            f.write("\n")
    print(json.dumps(payload))


def cmd_sweep(args):
    trial, train_cfg, seed = _load(args)
    values = tuple(float(v) for v in args.values) if args.values else None
    spec = SweepSpec(
        variable=args.variable,
        values=values,
        base=trial,
        decoders=tuple(args.decoders),
        trials=args.trials,
        base_seed=seed,
        train_cfg=train_cfg,
    )
    results = run_sweep(spec)
    out = _require_out(args, "--out (directory)")
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "results.csv")
    write_results_csv(results, csv_path)
    x_key = {"baud": "baud", "lux": "lux", "distance": "distance_m",
             "n_cells": "n_cells", "n_anchors": "n_anchors", "order": "order"}[args.variable]
    plot_ber(load_results_csv(csv_path), x_key,
             os.path.join(out, f"sweep_{args.variable}.svg"), x_label=args.variable)
    print(f"wrote {len(results)} trials to {csv_path}")


def cmd_loo(args):
    trial, train_cfg, seed = _load(args)
    out = leave_one_out(
        args.variable,
        args.hold,
        decoders=tuple(args.decoders),
        base=trial,
        train_packets=args.train_packets,
        test_packets=args.test_packets,
        base_seed=seed,
        train_cfg=train_cfg,
    )
    blob = json.dumps(out, indent=1, default=list)
    if args.out:
        with open(args.out, "w") as f:
            f.write(blob + "\n")
    print(blob)


def cmd_report(args):
    rows = load_results_csv(args.results)
    out = _require_out(args, "--out (directory)")
    os.makedirs(out, exist_ok=True)
    plot_ber(rows, args.x_key, os.path.join(out, f"ber_vs_{args.x_key}.svg"))
    from .harness.reporting import aggregate

    agg = aggregate(rows, args.x_key)
    agg_path = os.path.join(out, "aggregate.csv")
    with open(agg_path, "w") as f:
        f.write(f"decoder,{args.x_key},mean_ber,std_ber\n")
        for decoder, (xs, means, stds) in agg.items():
            for x, m, s in zip(xs, means, stds):
                f.write(f"{decoder},{float(x)!r},{float(m)!r},{float(s)!r}\n")
    print(f"wrote {agg_path}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csk-modem", description=__doc__)
    subs = p.add_subparsers(dest="command", required=True)

    s = subs.add_parser("constellation", help="export constellation points as CSV")
    s.add_argument("--order", type=int, choices=(4, 8, 16), required=True)
    _common(s)
    s.set_defaults(func=cmd_constellation)

    s = subs.add_parser("tx", help="frame a payload and emit the duty waveform CSV")
    s.add_argument("--order", type=int, choices=(4, 8, 16), required=True)
    s.add_argument("--baud", type=float, required=True)
    s.add_argument("--payload-hex", default=None)
    s.add_argument("--payload-text", default="hello")
    s.add_argument("--payload-bits", default=None)
    s.add_argument("--layout", default=None, help="layout TOML file")
    _common(s)
    s.set_defaults(func=cmd_tx)

    s = subs.add_parser("channel", help="simulate the channel over a waveform CSV")
    s.add_argument("--waveform", default=None)
    s.add_argument("--packets", type=int, default=None,
                   help="generate a dataset directory of this many packets instead")
    _common(s)
    s.set_defaults(func=cmd_channel)

    s = subs.add_parser("rx", help="synchronize and decode a trace CSV")
    s.add_argument("--trace", required=True)
    s.add_argument("--decoder", choices=("ls", "ml_raw", "ml_anchor"), default="ls")
    s.add_argument("--model", default=None)
    s.add_argument("--order", type=int, default=None)
    s.add_argument("--baud", type=float, default=None)
    s.add_argument("--payload-slots", type=int, default=None)
    s.add_argument("--layout", default=None)
    _common(s)
    s.set_defaults(func=cmd_rx)

    s = subs.add_parser("train", help="train an ml decoder on a dataset directory")
    s.add_argument("--mode", choices=("raw", "anchor"), required=True)
    s.add_argument("--dataset", required=True)
    _common(s)
    s.set_defaults(func=cmd_train)

    s = subs.add_parser("trial", help="run one end-to-end trial")
    s.add_argument("--decoder", choices=("ls", "ml_raw", "ml_anchor"), default="ls")
    s.add_argument("--model", default=None)
    _common(s)
    s.set_defaults(func=cmd_trial)

    s = subs.add_parser("sweep", help="run a BER sweep and write results CSV + SVG")
    s.add_argument("--variable", required=True,
                   choices=("baud", "lux", "distance", "n_cells", "n_anchors", "order"))
    s.add_argument("--values", nargs="*", default=None)
    s.add_argument("--decoders", nargs="+", default=["ls"])
    s.add_argument("--trials", type=int, default=10)
    _common(s)
    s.set_defaults(func=cmd_sweep)

    s = subs.add_parser("loo", help="leave-one-out evaluation over distance or lux")
    s.add_argument("--variable", choices=("distance", "lux"), required=True)
    s.add_argument("--hold", type=float, required=True)
    s.add_argument("--decoders", nargs="+", default=["ls", "ml_raw", "ml_anchor"])
    s.add_argument("--train-packets", type=int, default=60)
    s.add_argument("--test-packets", type=int, default=10)
    _common(s)
    s.set_defaults(func=cmd_loo)

    s = subs.add_parser("report", help="aggregate and plot a results CSV")
    s.add_argument("--results", required=True)
    s.add_argument("--x-key", default="distance_m")
    _common(s)
    s.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CskModemError as exc:
        sys.exit(f"error: {type(exc).__name__}: {exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

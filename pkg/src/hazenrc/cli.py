"""Command-line interface: ``hazenrc {synth,estimate,evaluate,ablate,align-demo}``."""
import argparse
import sys

from . import evaluation as ev
from .estimators import NrcEstimator
from .exceptions import EmptyDarkSet, HazeError, ImageIOError, NoMatchedSps, NoValidPixels
from .imgcore import load_image
from .synth import INDOOR_PRESETS, OUTDOOR_PRESETS, PRESETS, parse_scene_config

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EMPTY_DARK_SET = 3
EXIT_NO_VALID_PIXELS = 4
EXIT_NO_MATCHED_SPS = 5
EXIT_IO = 6
EXIT_OTHER = 7

PRESET_GROUPS = {"outdoor": OUTDOOR_PRESETS, "indoor": INDOOR_PRESETS, "all": tuple(PRESETS)}


def _floats(text, n, what):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what} must be {n} comma-separated numbers, got {text!r}")
    if len(values) != n:
        raise argparse.ArgumentTypeError(f"{what} must be {n} comma-separated numbers, got {text!r}")
    return values


def airlight_arg(text):
    return _floats(text, 3, "airlight")


def shift_arg(text):
    dx, dy = _floats(text, 2, "shift")
    if dx != int(dx) or dy != int(dy):
        raise argparse.ArgumentTypeError("shift must be integer pixels")
    return int(dx), int(dy)


def _estimator_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("estimator")
    g.add_argument("--zn", type=float, default=0.3, help="dark-superpixel threshold on the dark channel (default 0.3)")
    g.add_argument("--patch-radius", type=int, default=7, help="dark channel patch radius (default 7)")
    g.add_argument("--airlight-top-fraction", type=float, default=0.001,
                   help="fraction of brightest dark-channel pixels averaged for the airlight (default 0.001)")
    g.add_argument("--sp-count", type=int, default=400, help="target superpixel count (default 400)")
    g.add_argument("--compactness", type=float, default=10.0, help="SLIC compactness (default 10)")
    g.add_argument("--eps-num", type=float, default=1.0 / 255.0, help="near-airlight guard (default 1/255)")
    g.add_argument("--eps-log", type=float, default=1e-3, help="flat-denominator guard (default 1e-3)")
    g.add_argument("--no-clamp", action="store_true", help="report gamma without clamping to [0, 1]")
    g.add_argument("--max-shift", type=int, default=32, help="alignment search radius (default 32)")
    return p


def _estimator(args, **overrides):
    params = dict(dark_threshold=args.zn, patch_radius=args.patch_radius,
                  airlight_top_fraction=args.airlight_top_fraction, sp_count=args.sp_count,
                  compactness=args.compactness, eps_num=args.eps_num, eps_log=args.eps_log,
                  clamp=not args.no_clamp, max_shift=args.max_shift)
    params.update(overrides)
    return NrcEstimator(**params)


def build_parser():
    parser = argparse.ArgumentParser(prog="hazenrc", description="Haze density (NRC) estimation from reference captures.")
    sub = parser.add_subparsers(dest="command", required=True)
    est_flags = _estimator_flags()

    p = sub.add_parser("synth", help="render a synthetic 5 x 11 haze corpus")
    p.add_argument("configs", nargs="*", help="scene config files (key = value)")
    p.add_argument("--preset", action="append", default=[],
                   choices=sorted(PRESETS) + sorted(PRESET_GROUPS), help="built-in scene(s); repeatable")
    p.add_argument("--seed", type=int, help="override the scene seed")
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma added to every capture")
    p.add_argument("--out", default="corpus", help="output directory (default ./corpus)")

    p = sub.add_parser("estimate", parents=[est_flags], help="NRC of one capture against two references")
    p.add_argument("ref1", help="lighter reference capture")
    p.add_argument("ref2", help="heavier reference capture")
    p.add_argument("test", help="capture to measure")
    p.add_argument("--airlight", type=airlight_arg, action="append", metavar="R,G,B",
                   help="airlight override: once for all three captures, or three times (ref1, ref2, test)")
    p.add_argument("--align", action="store_true", help="register the test capture and match superpixels")
    p.add_argument("--out", help="write the per-superpixel report CSV here")

    for name, help_ in (("evaluate", "precision of every test capture in a corpus"),
                        ("ablate", "dark-superpixel selection on vs off")):
        p = sub.add_parser(name, parents=[est_flags], help=help_)
        p.add_argument("manifests", nargs="+", help="manifest.csv files or scene directories")
        p.add_argument("--include-references", action="store_true", help="also evaluate the two reference captures")
        p.add_argument("--true-airlight", action="store_true", help="use manifest airlights instead of estimating")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--plot", help="PNG scatter plot path")

    p = sub.add_parser("align-demo", parents=[est_flags], help="matched estimation on shifted test views")
    p.add_argument("manifest", help="manifest.csv or scene directory")
    p.add_argument("--shift", type=shift_arg, default=(5, 3), metavar="DX,DY", help="camera shift (default 5,3)")
    p.add_argument("--beta", type=float, action="append", help="only these test betas; repeatable")
    p.add_argument("--true-airlight", action="store_true", help="use manifest airlights instead of estimating")
    p.add_argument("--out", help="CSV output path")
    return parser


def cmd_synth(args):
    scenes = []
    for path in args.configs:
        with open(path) as fh:
            scenes.append(parse_scene_config(fh.read()))
    names = [n for group in args.preset for n in PRESET_GROUPS.get(group, (group,))]
    if not scenes and not names:
        names = ["road"]
    scenes += [PRESETS[n] for n in dict.fromkeys(names)]
    for spec, seed in scenes:
        path = ev.synth_scene(spec, seed if args.seed is None else args.seed, args.out, args.noise)
        print(path)
    return EXIT_OK


def cmd_estimate(args):
    if args.airlight and len(args.airlight) not in (1, 3):
        raise ValueError("--airlight must be given once or three times")
    airlights = None if not args.airlight else (args.airlight * 3 if len(args.airlight) == 1 else args.airlight)
    images = [load_image(p) for p in (args.ref1, args.ref2, args.test)]
    est = _estimator(args, align=args.align)
    est.fit(images[:2], airlights=None if airlights is None else airlights[:2])
    report = est.report(images[2], None if airlights is None else airlights[2])
    print(f"gamma_dot {report.gamma_dot:.6f}")
    print(report.summary())
    if args.out:
        report.to_csv(args.out)
    return EXIT_OK


def _print_summary(scene, summary):
    print(f"{scene}: n={summary['n']} failed={summary['failed']} mae={summary['mae']:.4f} "
          f"max_error={summary['max_error']:.4f} max_airlight_error={summary['max_airlight_error']:.4f}")


def cmd_evaluate(args):
    records = []
    for path in args.manifests:
        manifest = ev.read_manifest(path)
        recs = ev.evaluate(manifest, _estimator(args), args.include_references, args.true_airlight)
        _print_summary(manifest.scene, ev.summarize(recs))
        records += recs
    if len(args.manifests) > 1:
        _print_summary("all", ev.summarize(records))
    if args.out:
        ev.write_records(records, args.out, ev.PrecisionRecord)
    if args.plot:
        ev.scatter_plot(records, args.plot, title="NRC precision")
    return EXIT_OK


def cmd_ablate(args):
    records = []
    for path in args.manifests:
        manifest = ev.read_manifest(path)
        records += ev.ablate(manifest, _estimator(args), args.include_references, args.true_airlight)
    for arm, s in ev.summarize_ablation(records).items():
        print(f"{arm}: mean_signed_error={s['mean_signed_error']:+.4f} "
              f"light_haze_mean_signed_error={s['light_mean_signed_error']:+.4f} "
              f"(n={s['light_n']}) failed={s['failed']}")
    if args.out:
        ev.write_records(records, args.out, ev.AblationRecord)
    if args.plot:
        ev.scatter_plot(records, args.plot, title="dark-superpixel ablation", label_attr="arm")
    return EXIT_OK


def cmd_align_demo(args):
    manifest = ev.read_manifest(args.manifest)
    records = ev.align_demo(manifest, args.shift, _estimator(args), args.beta, args.true_airlight)
    for r in records:
        print(f"beta={r.beta_t:.1f} shift=({r.est_dx},{r.est_dy}) gamma_hat={r.gamma_hat:.4f} "
              f"gamma_gt={r.gamma_gt:.4f} matched={r.matched_sps} {r.status}")
    if args.out:
        ev.write_records(records, args.out, ev.AlignRecord)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "estimate": cmd_estimate, "evaluate": cmd_evaluate,
            "ablate": cmd_ablate, "align-demo": cmd_align_demo}


ERROR_CODES = (
    (EmptyDarkSet, EXIT_EMPTY_DARK_SET),
    (NoValidPixels, EXIT_NO_VALID_PIXELS),
    (NoMatchedSps, EXIT_NO_MATCHED_SPS),
    ((ImageIOError, OSError), EXIT_IO),
    (HazeError, EXIT_OTHER),
    (ValueError, EXIT_USAGE),
)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (HazeError, OSError, ValueError) as exc:
        code = next(code for kind, code in ERROR_CODES if isinstance(exc, kind))
        print(f"{parser.prog}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code

if __name__ == "__main__":
    sys.exit(main())

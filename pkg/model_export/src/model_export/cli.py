import argparse
import logging
import sys

from .export import export_model


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="model-export",
        description="Export a VGG19 fc2 feature extractor to the ONNX "
                    "interchange format, with a reference-feature fixture",
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--weights", default="pretrained",
        help="pretrained | seeded:<int> | file:<state_dict.pth> "
             "(seeded gives deterministic random weights for offline use)",
    )
    parser.add_argument("--skip-verify", action="store_true",
                        help="skip the consumer-CLI fidelity check")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    try:
        manifest = export_model(args.out, weights=args.weights,
                                verify=not args.skip_verify)
    except Exception as exc:
        logging.error("%s", exc)
        return 1
    print(f"exported {manifest.model_file} (sha256 {manifest.checksum[:12]}...)")
    if manifest.source_vs_exported_cosine is not None:
        print(f"source vs exported cosine: {manifest.source_vs_exported_cosine:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

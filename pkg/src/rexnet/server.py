"""Read-only static HTTP server for explanation bundles and the explorer UI."""

import json
from functools import partial
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path


class BundleHandler(SimpleHTTPRequestHandler):
    extensions_map = {
        **SimpleHTTPRequestHandler.extensions_map,
        ".json": "application/json",
        ".wav": "audio/wav",
        ".js": "text/javascript",
        ".mjs": "text/javascript",
        ".css": "text/css",
        ".png": "image/png",
    }

    def log_message(self, fmt, *args):  # quiet by default
        pass


def check_bundle_dir(bundle_dir):
    root = Path(bundle_dir)
    index = root / "index.json"
    if not index.exists():
        raise SystemExit(f"{root} has no index.json; run `rexnet explain` first")
    doc = json.loads(index.read_text())
    if not doc.get("clips"):
        raise SystemExit(f"{root} contains no bundles")
    return root


def make_server(bundle_dir, port):
    root = check_bundle_dir(bundle_dir)
    handler = partial(BundleHandler, directory=str(root))
    try:
        return ThreadingHTTPServer(("127.0.0.1", port), handler)
    except OSError as exc:
        raise SystemExit(f"cannot bind port {port}: {exc}") from exc


def serve(bundle_dir, port):
    httpd = make_server(bundle_dir, port)
    print(f"serving {bundle_dir} at http://127.0.0.1:{port}/ (Ctrl-C to stop)")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()

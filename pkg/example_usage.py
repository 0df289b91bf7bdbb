"""
Example usage of the Young-Taylor Expansion Service
"""
import requests

# Scalar linear equation dX = X dy driven by a seeded fBm path
example_config = {
    "experiment": "compare",
    "path": {
        "kind": "fbm",
        "hurst": 0.75,
        "dimension": 1,
        "horizon": 0.5,
        "grid_size": 1025,
        "seed": 7,
        "beta_hint": 0.9
    },
    "system": {
        "x0": [1.0],
        "fields": [
            {"kind": "zero"},
            {"kind": "linear", "matrix": [[1.0]]}
        ]
    },
    "parameters": {"alpha": 0.25, "M": 1.0, "gamma": 0.0, "N": 6, "k_max": 6, "time_points": 4}
}


def run_example():
    """Validate the config, run it, and print the manifest summary"""

    print("📐 Young-Taylor Expansion Service - Example Usage\n")
    print("=" * 60)

    try:
        print("\n📡 Validating config...")
        response = requests.post("http://localhost:8000/validate", json=example_config, timeout=30)
        if response.status_code != 200:
            print(f"\n❌ Invalid config: {response.json()['detail']}")
            return

        print("📡 Running experiment...")
        response = requests.post(
            "http://localhost:8000/run",
            params={"name": "example"},
            json=example_config,
            timeout=600
        )

        if response.status_code == 200:
            manifest = response.json()

            print("\n✅ Experiment Complete!")
            print("=" * 60)
            print(f"\n📊 Experiment: {manifest['experiment']}")
            window = manifest.get("convergence_window", {})
            if window:
                status = "closes" if window["crossed"] else "stays open up to"
                print(f"   Convergence window {status} t = {window['t_c']:.4g}")
            print("\n📁 Outputs:")
            for name in manifest["outputs"]:
                print(f"   - {name}")
            for message in manifest.get("warnings", []):
                print(f"\n⚠️  {message}")

            print("\n" + "=" * 60)

        else:
            print(f"\n❌ Error: HTTP {response.status_code}")
            print(response.text)

    except requests.exceptions.ConnectionError:
        print("\n❌ Error: Could not connect to API server.")
        print("   Make sure the server is running:")
        print("   python run_server.py")


if __name__ == "__main__":
    run_example()

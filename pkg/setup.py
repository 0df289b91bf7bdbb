"""
Setup script to verify the installation and warm the fBm factor cache
"""
import sys


def verify_installation():
    """Verify that required packages are installed"""
    print("🔍 Verifying installation...")

    required_packages = [
        'fastapi',
        'uvicorn',
        'pydantic',
        'requests',
        'numpy',
        'scipy',
        'matplotlib',
        'dotenv'
    ]

    missing = []
    for package in required_packages:
        try:
            __import__(package)
            print(f"   ✓ {package}")
        except ImportError:
            print(f"   ✗ {package} (missing)")
            missing.append(package)

    if missing:
        print(f"\n❌ Missing packages: {', '.join(missing)}")
        print("   Run: pip install -r requirements.txt")
        return False
    print("\n✅ All packages installed!")
    return True


def smoke_test():
    """Sample one small fBm path and solve the linear equation on it"""
    print("\n🧪 Running a smoke test...")
    from fields import AffineField, ZeroField
    from jets import JetSystem
    from paths import FbmSpec, sample_fbm
    from young import picard_solve

    path = sample_fbm(FbmSpec(hurst=0.75, dimension=1, horizon=0.5, grid_size=257, seed=1))
    system = JetSystem(1, [ZeroField(1), AffineField([[1.0]])], [1.0])
    output = picard_solve(system, path)
    print(f"   ✓ Picard converged in {output.iterations_used} iterations, X_T = {output.trajectory[-1, 0]:.6f}")


if __name__ == "__main__":
    print("🚀 Young-Taylor Expansion Toolkit - Setup\n")
    print("=" * 60)

    success = verify_installation()
    if success:
        smoke_test()

    print("\n" + "=" * 60)
    if success:
        print("\n✅ Setup complete! You can now run:")
        print("   python cli.py run --config experiment.json")
        print("   or")
        print("   python run_server.py")
    else:
        print("\n⚠️  Please install missing packages before proceeding.")
        sys.exit(1)

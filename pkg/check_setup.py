# check_setup.py - Environment verification before running experiments

import importlib
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent

REQUIRED_PACKAGES = ['numpy', 'scipy', 'mpmath', 'joblib', 'psutil']

REQUIRED_FILES = [
    'main.py',
    'requirements.txt',
    'pytest.ini',
    'configs/balancing.cfg',
    'src/__init__.py',
    'src/core/__init__.py',
    'src/harness/__init__.py',
]


def print_header():
    print("=" * 60)
    print("🔍 stretchlat - Environment Pre-Check")
    print("=" * 60)


def check_python_version():
    """Check Python version"""
    print("📍 Checking Python version...")
    version = sys.version_info
    print(f"   Python {version.major}.{version.minor}.{version.micro}")

    if version < (3, 9):
        print("   ❌ Python 3.9+ required!")
        return False
    print("   ✅ Python version OK")
    return True


def check_required_files(root=ROOT):
    """Check if all required files exist"""
    print("📍 Checking required files...")

    all_exist = True
    for file_path in REQUIRED_FILES:
        if (Path(root) / file_path).exists():
            print(f"   ✅ {file_path}")
        else:
            print(f"   ❌ {file_path} - MISSING")
            all_exist = False
    return all_exist


def check_dependencies():
    """Check if all required dependencies are installed"""
    print("📍 Checking Python dependencies...")

    missing_packages = []
    for package in REQUIRED_PACKAGES:
        try:
            module = importlib.import_module(package)
            version = getattr(module, '__version__', 'unknown')
            print(f"   ✅ {package}: {version}")
        except ImportError:
            print(f"   ❌ {package} - NOT INSTALLED")
            missing_packages.append(package)

    if missing_packages:
        print("\n   📦 Install missing packages with:")
        print(f"   pip install {' '.join(missing_packages)}")
        return False
    return True


def check_threads():
    """Check the default worker thread count"""
    print("📍 Checking worker threads...")
    try:
        from src.core.settings import default_threads
        threads = default_threads()
    except ImportError as e:
        print(f"   ❌ Could not read the core count: {e}")
        return False
    print(f"   ✅ {threads} logical cores available")
    return True


def check_smoke_count():
    """Count the lattice points of the disk of radius 5"""
    print("📍 Running smoke count...")
    try:
        from src.core.count import CountRequest, count
        from src.core.domain import BodySpec
        from src.core.measure import StretchFactor

        disk = BodySpec.superellipsoid((2, 2))
        value = count(CountRequest(disk, StretchFactor.identity(2), 5.0, "full")).count
    except Exception as e:
        print(f"   ❌ Smoke count failed: {e}")
        return False

    if value != 81:
        print(f"   ❌ Disk of radius 5 has 81 lattice points, got {value}")
        return False
    print("   ✅ Disk of radius 5: 81 lattice points")
    return True


def suggest_fixes():
    """Suggest fixes for common issues"""
    print("\n🔧 Common Setup Issues and Fixes:")
    print("━" * 60)

    print("1. Dependencies not installed:")
    print("   • Run: pip install -r requirements.txt")

    print("\n2. Import errors from src:")
    print("   • Run commands from the repository root")
    print("   • Or install the package: pip install -e .")

    print("\n3. Missing configs/balancing.cfg:")
    print("   • Restore it from version control; `stretchlat run` needs a config")


def main():
    print_header()

    checks = [
        ("Python Version", check_python_version),
        ("Required Files", check_required_files),
        ("Dependencies", check_dependencies),
        ("Worker Threads", check_threads),
        ("Smoke Count", check_smoke_count),
    ]

    passed = 0
    total = len(checks)

    for check_name, check_func in checks:
        if check_func():
            passed += 1
        print()

    print("=" * 60)
    print(f"📊 SUMMARY: {passed}/{total} checks passed")
    print("=" * 60)

    if passed == total:
        print("🎉 ALL CHECKS PASSED!")
        print("\nNext steps:")
        print("1. Run: pytest -m 'not slow'")
        print("2. Run: python main.py run configs/balancing.cfg")
        return True

    failed = total - passed
    print(f"❌ {failed} CHECK(S) FAILED")
    suggest_fixes()
    return False


if __name__ == "__main__":
    sys.exit(0 if main() else 1)

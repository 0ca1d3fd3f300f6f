"""
System Verification Script
Checks the environment, shipped fixtures and every registry model before running experiments
"""

import sys
from pathlib import Path

project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

FIXTURE_DIR = project_root / 'data' / 'fixtures'
GRADIENT_TOL = 1e-5


def print_section(title):
    """Print section header"""
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70)


def check_python_version():
    """Check Python version"""
    print_section("Python Version Check")
    version = sys.version_info
    print(f"Python version: {version.major}.{version.minor}.{version.micro}")

    if (version.major, version.minor) >= (3, 9):
        print("✅ Python version is compatible (3.9+)")
        return True
    print("❌ Python 3.9 or higher required")
    return False


def check_dependencies():
    """Check if all required packages are installed"""
    print_section("Dependency Check")

    dependencies = {
        'numpy': 'Arrays and linear algebra',
        'scipy': 'Integrators, quadrature, factorizations',
        'pandas': 'Trajectory and sweep tables',
        'dotenv': 'Environment defaults',
        'pytest': 'Test suite',
    }

    all_installed = True
    for package, description in dependencies.items():
        try:
            __import__(package)
            print(f"✅ {package:12} - {description}")
        except ImportError:
            print(f"❌ {package:12} - MISSING ({description})")
            all_installed = False

    if all_installed:
        print("\n✅ All dependencies installed")
    else:
        print("\n❌ Missing dependencies. Run: pip install -r requirements.txt")
    return all_installed


def check_settings():
    """Check TRACKING_* environment settings"""
    print_section("Environment Settings Check")
    from dotenv import load_dotenv
    from experiments.config import Settings

    load_dotenv()
    try:
        settings = Settings()
    except ValueError as e:
        print(f"❌ Invalid setting: {e}")
        return False
    print(f"✅ output dir {settings.output_dir}, log level {settings.log_level}, "
          f"workers {settings.workers}, rtol {settings.rtol:g}")
    return True


def check_fixtures():
    """Check that every shipped config parses"""
    print_section("Fixture Check")
    from core.errors import TrackingError
    from experiments.config import parse_config

    paths = sorted(FIXTURE_DIR.glob('*.json'))
    if not paths:
        print(f"❌ No fixtures found in {FIXTURE_DIR}")
        return False
    ok = True
    for path in paths:
        try:
            cfg = parse_config(str(path))
            print(f"✅ {path.name:28} - {cfg.model.name}, method {cfg.method}, ε={cfg.epsilon:g}")
        except TrackingError as e:
            print(f"❌ {path.name:28} - {e.code}: {e.message}")
            ok = False
    return ok


def check_model_gradients():
    """Compare model gradients against finite differences"""
    print_section("Model Gradient Check")
    from models.zoo import REGISTRY, ModelSpec, make_model, sample_box
    from perturbation.projectors import latin_hypercube_samples

    ok = True
    for name in REGISTRY:
        system = make_model(ModelSpec(name))
        lo, hi = sample_box(name)
        errors = system.gradient_errors(latin_hypercube_samples(lo, hi, count=16, seed=1))
        passed = max(errors.values()) <= GRADIENT_TOL
        mark = "✅" if passed else "❌"
        print(f"{mark} {name:12} - gradR {errors['gradR']:.2e}, gradB {errors['gradB']:.2e}")
        ok = ok and passed
    return ok


def check_linearizing():
    """Linearizing report for every registry model with S = I"""
    print_section("Linearizing Assumption Check")
    import numpy as np
    from core.errors import TrackingError
    from models.zoo import REGISTRY, ModelSpec, make_model, sample_box
    from perturbation.projectors import latin_hypercube_samples, verify_linearizing

    ok = True
    for name in REGISTRY:
        system = make_model(ModelSpec(name))
        lo, hi = sample_box(name)
        try:
            report = verify_linearizing(system, np.eye(system.n), latin_hypercube_samples(lo, hi))
        except TrackingError as e:
            print(f"❌ {name:12} - {e.code}: {e.message}")
            ok = False
            continue
        mark = "✅" if report.passed else "❌"
        print(f"{mark} {name:12} - Ω deviation {report.omega_deviation:.2e}, "
              f"Q·R residual {report.qr_residual:.2e} ({report.source})")
        ok = ok and report.passed
    return ok


def generate_report(results):
    """Generate final report"""
    print_section("VERIFICATION SUMMARY")

    total = len(results)
    passed = sum(results.values())

    print(f"\nChecks Passed: {passed}/{total}")
    print("\nDetailed Results:")
    for check_name, result in results.items():
        status = "✅ PASS" if result else "❌ FAIL"
        print(f"  {status} - {check_name}")

    print("\n" + "=" * 70)
    if passed == total:
        print("🎉 ALL CHECKS PASSED - System is ready!")
        print("\nYou can now run: python app.py solve --config data/fixtures/pendulum_fig1.json")
    else:
        print("❌ SYSTEM NOT READY - Please fix the issues above")
    print("=" * 70)
    return passed == total


def main():
    """Run all verification checks"""
    print("\n" + "=" * 70)
    print("  SINGULAR-PERTURBATION TRAJECTORY TRACKING")
    print("  System Verification")
    print("=" * 70)

    results = {}
    results['Python Version'] = check_python_version()
    results['Dependencies'] = check_dependencies()

    # Everything below imports the package
    if results['Dependencies']:
        results['Environment Settings'] = check_settings()
        results['Fixtures'] = check_fixtures()
        results['Model Gradients'] = check_model_gradients()
        results['Linearizing Assumption'] = check_linearizing()

    all_passed = generate_report(results)
    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())

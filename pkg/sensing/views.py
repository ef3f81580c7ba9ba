from django.core.cache import cache
from django.http import JsonResponse
from django.utils import timezone
from django.views.decorators.http import require_GET

from .models import ExperimentRun, PolicyRecord
from .signals import policy_cache_key


def error_response(code, message, status):
    return JsonResponse({
        "status": "error",
        "error": {
            "code": code,
            "message": message
        }
    }, status=status)


@require_GET
def policy_thresholds(request, name):
    cache_key = policy_cache_key(name)
    cached_result = cache.get(cache_key)
    if cached_result:
        return JsonResponse(cached_result, status=200)

    record = PolicyRecord.objects.filter(name=name).order_by('-created_at', '-id').first()
    if record is None:
        return error_response("POLICY_NOT_FOUND", f"No solved policy named {name!r}.", 404)

    result = {
        "status": "success",
        "data": {
            "name": record.name,
            "mode": record.mode,
            "one_threshold": record.one_threshold,
            "M": record.M,
            "K": record.K,
            "grid_size": record.grid_size,
            "format_version": record.format_version,
            "stages": record.thresholds,
        },
        "metadata": {
            "solved_at": record.created_at.isoformat(),
            "served_at": timezone.now().isoformat(),
            "file": record.file_path,
        }
    }

    cache.set(cache_key, result, timeout=3600)
    return JsonResponse(result, status=200)


@require_GET
def experiment_run(request, run_id):
    run = ExperimentRun.objects.filter(pk=run_id).first()
    if run is None:
        return error_response("RUN_NOT_FOUND", f"No experiment run with id {run_id}.", 404)

    return JsonResponse({
        "status": "success",
        "data": {
            "id": run.id,
            "preset": run.preset,
            "detector": run.detector,
            "seed": int(run.seed),
            "trials": run.trials,
            "row_count": run.row_count,
            "csv_path": run.csv_path,
            "metadata_path": run.metadata_path,
            "parameters": run.parameters,
        },
        "metadata": {
            "created_at": run.created_at.isoformat(),
        }
    }, status=200)

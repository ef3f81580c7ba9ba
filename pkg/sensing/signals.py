# signals.py
from django.core.cache import cache
from django.db.models.signals import post_save
from django.dispatch import receiver

from .models import PolicyRecord


def policy_cache_key(name):
    return f"policy_{name}"


@receiver(post_save, sender=PolicyRecord)
def drop_cached_policy(sender, instance, created, **kwargs):
    # a fresh solve under the same name replaces what the API serves
    cache.delete(policy_cache_key(instance.name))

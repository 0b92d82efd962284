"""
Experiment Runner
Runs a grid of trials sequentially or on a thread pool, with progress callbacks
"""

import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Optional, Dict, Any, List, Sequence, Tuple

from logger import get_logger
from records_io import TrialRecord, record_order

logger = get_logger('lo_lab.experiment_runner')


class RunStatus:
    """Run status constants"""
    IDLE = 'idle'
    RUNNING = 'running'
    COMPLETED = 'completed'
    INTERRUPTED = 'interrupted'
    FAILED = 'failed'


class ExperimentRunner:
    """
    Executes trial_fn(n, trial_index) for every grid point.

    Results are returned in (n, trial_index) order whatever the completion
    order, so downstream aggregation never depends on scheduling.
    """

    def __init__(
        self,
        trial_fn: Callable[[int, int], TrialRecord],
        sizes: Sequence[int],
        trials_per_size: int,
        workers: int = 1,
        progress_callback: Optional[Callable[[Dict[str, Any]], None]] = None,
        output_callback: Optional[Callable[[str], None]] = None
    ):
        self.trial_fn = trial_fn
        self.sizes = list(sizes)
        self.trials_per_size = trials_per_size
        self.workers = max(1, workers)
        self.progress_callback = progress_callback
        self.output_callback = output_callback

        self.status = RunStatus.IDLE
        self.start_time = None
        self.end_time = None
        self.records: List[TrialRecord] = []
        self.records_lock = threading.Lock()
        self.size_counts: Dict[int, int] = {}
        self.progress_data: Dict[str, Any] = {}
        self.total = len(self.sizes) * trials_per_size

    @property
    def grid(self) -> List[Tuple[int, int]]:
        return [(n, i) for n in self.sizes for i in range(self.trials_per_size)]

    def _record(self, record: TrialRecord):
        with self.records_lock:
            self.records.append(record)
            completed = len(self.records)
            self.size_counts[record.n] = self.size_counts.get(record.n, 0) + 1
            size_done = self.size_counts[record.n]
            self.progress_data = {
                'completed': completed,
                'total': self.total,
                'n': record.n,
                'trial_index': record.trial_index,
                'queries': record.queries,
                'truncated': record.truncated
            }
            progress = dict(self.progress_data)

        if record.truncated:
            logger.warning(f"[TRIAL] n={record.n} trial {record.trial_index} truncated at {record.queries} queries")
        if size_done == self.trials_per_size:
            logger.info(f"[EXPERIMENT] n={record.n}: {size_done} trials done")
        if self.progress_callback:
            self.progress_callback(progress)

    def _run_sequential(self):
        for n, trial_index in self.grid:
            self._record(self.trial_fn(n, trial_index))

    def _run_pool(self):
        executor = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix='lo_lab_trial')
        try:
            futures = [executor.submit(self.trial_fn, n, i) for n, i in self.grid]
            for future in as_completed(futures):
                self._record(future.result())
        except KeyboardInterrupt:
            executor.shutdown(wait=False, cancel_futures=True)
            raise
        executor.shutdown(wait=True)

    def sorted_records(self) -> List[TrialRecord]:
        with self.records_lock:
            return sorted(self.records, key=record_order)

    def run(self) -> Dict[str, Any]:
        """Run the grid and return {'success', 'interrupted', 'results'[, 'error']}"""
        self.status = RunStatus.RUNNING
        self.start_time = time.time()
        logger.info(f"[EXPERIMENT] Starting {len(self.grid)} trials on {self.workers} worker(s)")
        try:
            if self.workers == 1:
                self._run_sequential()
            else:
                self._run_pool()
            self.status = RunStatus.COMPLETED
            return {'success': True, 'interrupted': False, 'results': self.sorted_records()}

        except KeyboardInterrupt:
            self.status = RunStatus.INTERRUPTED
            if self.output_callback:
                self.output_callback("\n\nRun interrupted by user. Keeping completed trials...")
            logger.warning(f"[EXPERIMENT] Interrupted after {len(self.records)}/{len(self.grid)} trials")
            return {'success': False, 'interrupted': True, 'results': self.sorted_records()}

        except Exception as e:
            self.status = RunStatus.FAILED
            if self.output_callback:
                self.output_callback(f"\n\nAn unexpected error occurred: {e}")
            logger.error(f"[EXPERIMENT] Failed: {e}", exc_info=True)
            return {'success': False, 'interrupted': False, 'error': str(e), 'results': self.sorted_records()}

        finally:
            self.end_time = time.time()

// At most one in-flight what-if request; later submissions wait in FIFO
// order and surface a visible pending count.

export type Task<T> = () => Promise<T>;

export class SubmitQueue<T> {
  private inFlight = false;
  private waiting: { task: Task<T>; resolve: (v: T) => void; reject: (e: unknown) => void }[] = [];

  constructor(private onStateChange?: (pending: number, busy: boolean) => void) {}

  get pendingCount(): number {
    return this.waiting.length;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  submit(task: Task<T>): Promise<T> {
    return new Promise<T>((resolve, reject) => {
      this.waiting.push({ task, resolve, reject });
      this.notify();
      void this.drain();
    });
  }

  private notify(): void {
    this.onStateChange?.(this.waiting.length, this.inFlight);
  }

  private async drain(): Promise<void> {
    if (this.inFlight) return;
    const next = this.waiting.shift();
    if (!next) return;
    this.inFlight = true;
    this.notify();
    try {
      next.resolve(await next.task());
    } catch (err) {
      next.reject(err);
    } finally {
      this.inFlight = false;
      this.notify();
      void this.drain();
    }
  }
}

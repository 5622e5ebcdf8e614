package com.coreoz.wisp;

import java.time.Duration;

import com.coreoz.wisp.time.SystemTimeProvider;
import com.coreoz.wisp.time.TimeProvider;

public class SchedulerConfig {

	private final int minThreads;
	private final int maxThreads;
	private final Duration threadsKeepAliveTime;
	private final TimeProvider timeProvider;

	SchedulerConfig(int minThreads, int maxThreads, Duration threadsKeepAliveTime, TimeProvider timeProvider) {
		this.minThreads = minThreads;
		this.maxThreads = maxThreads;
		this.threadsKeepAliveTime = threadsKeepAliveTime;
		this.timeProvider = timeProvider;
	}

	public static Builder builder() {
		return new Builder();
	}

	public int getMinThreads() {
		return minThreads;
	}

	public int getMaxThreads() {
		return maxThreads;
	}

	public Duration getThreadsKeepAliveTime() {
		return threadsKeepAliveTime;
	}

	public TimeProvider getTimeProvider() {
		return timeProvider;
	}

	public long getMinimumDelayInMillisToReplaceJob() {
		return Scheduler.DEFAULT_MINIMUM_DELAY_IN_MILLIS_TO_REPLACE_JOB;
	}

	public static class Builder {
		private int minThreads = 0;
		private int maxThreads = Scheduler.DEFAULT_THREAD_POOL_SIZE;
		private Duration threadsKeepAliveTime = Duration.ofHours(1);
		private TimeProvider timeProvider = new SystemTimeProvider();

		public Builder maxThreads(int maxThreads) {
			if (maxThreads < 1) {
				throw new IllegalArgumentException("maxThreads must be at least 1");
			}
			this.maxThreads = maxThreads;
			return this;
		}

		public Builder timeProvider(TimeProvider timeProvider) {
			this.timeProvider = timeProvider;
			return this;
		}

		public SchedulerConfig build() {
			return new SchedulerConfig(minThreads, maxThreads, threadsKeepAliveTime, timeProvider);
		}
	}
}
